#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "skipkit/trajectory.hpp"

namespace skipkit {

using Vec3 = std::array<double, 3>;

enum class Pattern : std::uint8_t { zigzag = 1, pause_grasp = 2, arc = 3 };

std::string to_string(Pattern p);
Pattern pattern_from_string(const std::string& name);

struct ContactSite {
    Vec3 center{};
    Pattern pattern = Pattern::zigzag;
    double extent = 0.0;     // spatial span of the scripted motion (m)
    double tolerance = 0.0;  // completion radius around center (m)

    bool operator==(const ContactSite&) const = default;
};

// One task of a suite: start pose, ordered contact sites to visit, and a goal.
struct TaskInstance {
    std::string suite;
    std::uint64_t seed = 0;
    Vec3 start{};
    std::vector<ContactSite> sites;
    Vec3 goal{};
    double goal_tolerance = 0.0;

    bool operator==(const TaskInstance&) const = default;
};

inline constexpr int kMaxSites = 4;
inline constexpr double kTransitStep = 0.02;
inline constexpr double kMaxContactStep = 0.004;
inline constexpr double kMinSiteSeparation = 0.2;
inline constexpr double kSiteTolerance = 0.02;
inline constexpr double kGoalTolerance = 0.03;
inline constexpr double kDefaultNoise = 0.001;
inline constexpr double kDefaultEvalJitter = 0.005;

// Suites: "reach", "grasp-place", "sweep", "multi-pick", "trace" (arc-heavy).
const std::vector<std::string>& known_suites();

// Throws InvariantError when the instance leaves the unit workspace, has a
// non-positive tolerance or more than kMaxSites sites.
void validate(const TaskInstance& task);

// Deterministic in (seed, suite). Throws std::invalid_argument on unknown suite.
TaskInstance gen_task(std::uint64_t seed, const std::string& suite);

// Evaluation variant of a training task: start, site centers and goal jittered
// uniformly by +-jitter per axis, then clamped into the workspace.
TaskInstance perturb_task(const TaskInstance& base, double jitter, std::uint64_t seed);

struct GroundTruth {
    SegmentSet true_segments;
    // Steps where the script stops the arm or toggles the gripper.
    std::vector<int> scripted_keyframes;
};

struct Demo {
    Trajectory traj;
    GroundTruth truth;
};

// Scripted expert: straight transit legs at kTransitStep with Gaussian
// position noise (std = noise) on interior transit points, and dense
// noise-free contact patterns. Deterministic in (task, noise, seed).
Demo gen_expert(const TaskInstance& task, double noise, std::uint64_t seed, const std::string& id);

// Observation layout: position(3), gripper(1), kMaxSites x [center(3),
// pattern code(1), extent(1), tolerance(1)], goal(3).
inline constexpr int kObservationDim = 3 + 1 + kMaxSites * 6 + 3;
std::vector<double> make_observation(const TaskInstance& task, const Vec3& position, Gripper gripper);

// Task instance file, JSON Lines (one TaskInstance per line).
void save_tasks(const std::vector<TaskInstance>& tasks, const std::filesystem::path& path);
std::vector<TaskInstance> load_tasks(const std::filesystem::path& path);

// Ground-truth sidecar, JSON Lines: {"id": str, "true_segments": [[s,e],...]}.
void save_ground_truth(const std::vector<GroundTruth>& truth, const std::filesystem::path& path);
std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);

}  // namespace skipkit
