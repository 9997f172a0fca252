#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skipkit/msk.hpp"
#include "skipkit/policy_eval.hpp"
#include "skipkit/relabel.hpp"
#include "skipkit/synthdemo.hpp"

namespace skipkit {

// Expert demonstrations for per_suite tasks of each suite, ids "<suite>_<j>".
struct TrainSet {
    std::vector<TaskInstance> tasks;
    std::vector<Trajectory> trajs;
    std::vector<GroundTruth> truth;
};

TrainSet make_train_set(const std::vector<std::string>& suites, int per_suite, double noise, std::uint64_t seed);

// Evaluation task i perturbs training task i mod |train|.
std::vector<TaskInstance> make_eval_tasks(const std::vector<TaskInstance>& train, int n, double jitter,
                                          std::uint64_t seed);

// Three times the longest training demonstration.
int default_budget(const std::vector<Trajectory>& trajs);

struct ArmReport {
    SuiteMetrics metrics;
    JumpReport jumps;
    int horizon = 0;
    std::size_t samples = 0;
};

// Relabels, indexes and evaluates one arm. Empty segsets selects the dense
// arm. Calls are split into key/skip with the given training statistics so
// arms compared against each other share one threshold.
ArmReport run_arm(const TrainSet& train, const std::vector<SegmentSet>& segsets, int horizon,
                  const std::vector<TaskInstance>& eval_tasks, int budget, int k,
                  const DemoDisplacementStats& demo_stats);

}  // namespace skipkit
