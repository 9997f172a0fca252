#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skipkit/matrix.hpp"
#include "skipkit/relabel.hpp"
#include "skipkit/synthdemo.hpp"
#include "skipkit/trajectory.hpp"

namespace skipkit {

// Exact nearest-neighbor chunk retrieval over relabeled samples, keyed by the
// observation at the sample's source step.
class PolicyIndex {
public:
    struct Entry {
        std::vector<double> obs;
        Matrix chunk;
        std::vector<std::uint8_t> mask;
        SampleMode mode = SampleMode::refine;
    };

    PolicyIndex(std::vector<Entry> entries, int k);

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] int k() const noexcept { return k_; }
    [[nodiscard]] std::size_t obs_dim() const noexcept { return dim_; }
    [[nodiscard]] const Entry& entry(std::size_t i) const { return entries_.at(i); }

    // Index of the entry answering obs. k = 1: the nearest entry. k > 1: among
    // the k nearest, the nearest one whose mode is the most frequent (mode
    // count ties go to the mode of the nearer candidate). Distance ties go to
    // the lower entry index. Throws std::invalid_argument on dimension mismatch.
    [[nodiscard]] std::size_t query_index(std::span<const double> obs) const;
    [[nodiscard]] const Entry& query(std::span<const double> obs) const { return entries_[query_index(obs)]; }

private:
    std::vector<Entry> entries_;
    int k_;
    std::size_t dim_;
};

// Throws std::invalid_argument on an empty sample list or a sample whose
// episode or step is not in trajs.
PolicyIndex build_index(const std::vector<RelabeledSample>& samples, const std::vector<Trajectory>& trajs, int k = 1);

// Purely kinematic arm: each step teleports to the clamped target. Contact
// sites complete in order when the arm comes within their tolerance;
// completing a pause_grasp site toggles the gripper.
class Environment {
public:
    explicit Environment(TaskInstance task);

    void step(std::span<const double> target);
    [[nodiscard]] std::vector<double> observation() const;
    [[nodiscard]] bool success() const;
    [[nodiscard]] const Vec3& position() const noexcept { return pos_; }
    [[nodiscard]] std::size_t sites_done() const noexcept { return next_site_; }

private:
    void check_site();

    TaskInstance task_;
    Vec3 pos_;
    Gripper gripper_ = Gripper::open;
    std::size_t next_site_ = 0;
};

enum class CallMode { key, skip };

struct RolloutResult {
    std::string episode_id;
    bool success = false;
    int steps = 0;
    int forward_calls = 0;
    std::vector<double> jump_distances;  // |a_1 - p_ee| per call
    std::vector<CallMode> call_modes;    // filled by classify_calls
};

// Query, execute every unmasked chunk row, re-query; stops on success or when
// budget steps have been executed.
RolloutResult rollout(const PolicyIndex& index, const TaskInstance& task, int budget, const std::string& episode_id = "");

// Displacement |a_{t*} - p_t| of training samples, split by refine/skip mode.
struct DemoDisplacementStats {
    double refine_median = 0.0;
    double skip_median = 0.0;

    // Midpoint of the two medians; calls above it count as skips.
    [[nodiscard]] double threshold() const { return 0.5 * (refine_median + skip_median); }
};

// Medians of an empty class are 0.
DemoDisplacementStats demo_displacements(const std::vector<RelabeledSample>& samples,
                                         const std::vector<Trajectory>& trajs);

void classify_calls(RolloutResult& result, double threshold);

struct JumpReport {
    double threshold = 0.0;
    int key_count = 0;
    int skip_count = 0;
    std::optional<double> key_median;
    std::optional<double> skip_median;
    double separation = 0.0;  // between-class / total variance of the split
};

// Throws std::invalid_argument with fewer than 2 calls in total.
JumpReport jump_stats(const std::vector<RolloutResult>& results, const DemoDisplacementStats& demo);

// Between-class variance over total variance for the split at threshold;
// 0 when either class is empty or all values coincide.
double separation_score(const std::vector<double>& values, double threshold);

struct SuiteMetrics {
    double sr = 0.0;
    double steps = 0.0;
    std::optional<double> steps_succ;
    double forward_calls = 0.0;
    std::vector<double> jumps;
    std::vector<RolloutResult> results;
};

// Throws std::invalid_argument on an empty suite.
SuiteMetrics eval_suite(const PolicyIndex& index, const std::vector<TaskInstance>& suite, int budget);

// {"sr", "steps", "steps_succ", "forward_calls", "jump": {"key_median", "skip_median", "separation"}}
std::string metrics_json(const SuiteMetrics& m, const JumpReport& jumps);

// CSV "bin_lo,bin_hi,count_key,count_skip" over equal-width bins on
// [0, max jump]; results must already be classified.
std::string jump_histogram_csv(const std::vector<RolloutResult>& results, int bins = 40);

}  // namespace skipkit
