#include "skipkit/experiment.hpp"

#include <algorithm>
#include <stdexcept>

#include "skipkit/rng.hpp"

namespace skipkit {

namespace {
constexpr std::uint64_t kTaskSalt = 0x1000;
constexpr std::uint64_t kExpertSalt = 0x2000;
constexpr std::uint64_t kEvalSalt = 0x3000;
}  // namespace

TrainSet make_train_set(const std::vector<std::string>& suites, int per_suite, double noise, std::uint64_t seed) {
    if (per_suite < 1) {
        throw std::invalid_argument("need at least one demonstration per suite");
    }
    TrainSet out;
    for (std::size_t s = 0; s < suites.size(); ++s) {
        for (int j = 0; j < per_suite; ++j) {
            const auto n = static_cast<std::uint64_t>(s * 100000 + static_cast<std::size_t>(j));
            auto task = gen_task(mix_seed(seed, kTaskSalt + n), suites[s]);
            auto demo = gen_expert(task, noise, mix_seed(seed, kExpertSalt + n), suites[s] + "_" + std::to_string(j));
            out.tasks.push_back(std::move(task));
            out.trajs.push_back(std::move(demo.traj));
            out.truth.push_back(std::move(demo.truth));
        }
    }
    return out;
}

std::vector<TaskInstance> make_eval_tasks(const std::vector<TaskInstance>& train, int n, double jitter,
                                          std::uint64_t seed) {
    if (train.empty()) {
        throw std::invalid_argument("no training tasks to perturb");
    }
    std::vector<TaskInstance> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(perturb_task(train[static_cast<std::size_t>(i) % train.size()], jitter,
                                   mix_seed(seed, kEvalSalt + static_cast<std::uint64_t>(i))));
    }
    return out;
}

int default_budget(const std::vector<Trajectory>& trajs) {
    int longest = 0;
    for (const auto& t : trajs) {
        longest = std::max(longest, t.length());
    }
    return 3 * longest;
}

ArmReport run_arm(const TrainSet& train, const std::vector<SegmentSet>& segsets, int horizon,
                  const std::vector<TaskInstance>& eval_tasks, int budget, int k,
                  const DemoDisplacementStats& demo_stats) {
    const auto samples = segsets.empty() ? dense_relabel_dataset(train.trajs, horizon)
                                         : relabel_dataset(train.trajs, segsets, horizon);
    const auto index = build_index(samples, train.trajs, k);
    ArmReport rep;
    rep.horizon = horizon;
    rep.samples = samples.size();
    rep.metrics = eval_suite(index, eval_tasks, budget);
    for (auto& r : rep.metrics.results) {
        classify_calls(r, demo_stats.threshold());
    }
    rep.jumps = jump_stats(rep.metrics.results, demo_stats);
    return rep;
}

}  // namespace skipkit
