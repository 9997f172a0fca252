#include "skipkit/policy_eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "json.hpp"

namespace skipkit {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Same sum, abandoned once it reaches bound. Terms are added in the same
// order as sq_dist, so a completed sum is bit-identical to it.
double sq_dist_bounded(std::span<const double> a, std::span<const double> b, double bound) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
        if (s >= bound) {
            return s;
        }
    }
    return s;
}

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

PolicyIndex::PolicyIndex(std::vector<Entry> entries, int k) : entries_(std::move(entries)), k_(k) {
    if (entries_.empty()) {
        throw std::invalid_argument("policy index needs at least one entry");
    }
    if (k_ < 1) {
        throw std::invalid_argument("policy index k must be >= 1");
    }
    dim_ = entries_.front().obs.size();
    for (const auto& e : entries_) {
        if (e.obs.size() != dim_) {
            throw std::invalid_argument("policy index entries must share one observation dimension");
        }
    }
}

std::size_t PolicyIndex::query_index(std::span<const double> obs) const {
    if (obs.size() != dim_) {
        throw std::invalid_argument("query: observation dimension " + std::to_string(obs.size()) + " != " +
                                    std::to_string(dim_));
    }
    if (k_ == 1) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const double d = sq_dist_bounded(obs, entries_[i].obs, best_d);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    std::vector<std::pair<double, std::size_t>> dist(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        dist[i] = {sq_dist(obs, entries_[i].obs), i};
    }
    const auto k = std::min(static_cast<std::size_t>(k_), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    int counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < k; ++i) {
        ++counts[static_cast<int>(entries_[dist[i].second].mode)];
    }
    // Candidates are in distance order, so the first candidate reaching the
    // top count is both the mode-tie winner and the answer.
    const int top = *std::max_element(std::begin(counts), std::end(counts));
    for (std::size_t i = 0; i < k; ++i) {
        if (counts[static_cast<int>(entries_[dist[i].second].mode)] == top) {
            return dist[i].second;
        }
    }
    return dist.front().second;
}

PolicyIndex build_index(const std::vector<RelabeledSample>& samples, const std::vector<Trajectory>& trajs, int k) {
    if (samples.empty()) {
        throw std::invalid_argument("build_index: empty sample list");
    }
    std::unordered_map<std::string, const Trajectory*> by_id;
    for (const auto& t : trajs) {
        by_id[t.id] = &t;
    }
    std::vector<PolicyIndex::Entry> entries;
    entries.reserve(samples.size());
    for (const auto& s : samples) {
        const auto it = by_id.find(s.episode_id);
        if (it == by_id.end() || s.t < 1 || s.t > it->second->length()) {
            throw std::invalid_argument("build_index: sample (" + s.episode_id + ", " + std::to_string(s.t) +
                                        ") has no source step");
        }
        const auto o = it->second->observations.row(static_cast<std::size_t>(s.t - 1));
        entries.push_back({{o.begin(), o.end()}, s.chunk, s.mask, s.mode});
    }
    return PolicyIndex(std::move(entries), k);
}

Environment::Environment(TaskInstance task) : task_(std::move(task)), pos_(task_.start) { check_site(); }

void Environment::step(std::span<const double> target) {
    if (target.size() < 3) {
        throw std::invalid_argument("environment step needs a 3-d position target");
    }
    for (std::size_t j = 0; j < 3; ++j) {
        pos_[j] = std::clamp(target[j], 0.0, 1.0);
    }
    check_site();
}

void Environment::check_site() {
    if (next_site_ >= task_.sites.size()) {
        return;
    }
    const auto& site = task_.sites[next_site_];
    double d2 = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        d2 += (pos_[j] - site.center[j]) * (pos_[j] - site.center[j]);
    }
    if (std::sqrt(d2) <= site.tolerance) {
        if (site.pattern == Pattern::pause_grasp) {
            gripper_ = gripper_ == Gripper::open ? Gripper::closed : Gripper::open;
        }
        ++next_site_;
    }
}

std::vector<double> Environment::observation() const { return make_observation(task_, pos_, gripper_); }

bool Environment::success() const {
    if (next_site_ < task_.sites.size()) {
        return false;
    }
    double d2 = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        d2 += (pos_[j] - task_.goal[j]) * (pos_[j] - task_.goal[j]);
    }
    return std::sqrt(d2) <= task_.goal_tolerance;
}

RolloutResult rollout(const PolicyIndex& index, const TaskInstance& task, int budget, const std::string& episode_id) {
    if (budget < 1) {
        throw std::invalid_argument("rollout: budget must be >= 1");
    }
    Environment env(task);
    RolloutResult r;
    r.episode_id = episode_id;
    r.success = env.success();
    while (!r.success && r.steps < budget) {
        const auto& e = index.query(env.observation());
        ++r.forward_calls;
        const auto first = e.chunk.row(0);
        double d2 = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            d2 += (first[j] - env.position()[j]) * (first[j] - env.position()[j]);
        }
        r.jump_distances.push_back(std::sqrt(d2));
        if (e.mask.empty() || e.mask[0] == 0) {
            break;  // nothing to execute; the state would never change
        }
        for (std::size_t h = 0; h < e.mask.size() && r.steps < budget; ++h) {
            if (e.mask[h] == 0) {
                break;
            }
            env.step(e.chunk.row(h));
            ++r.steps;
            if (env.success()) {
                r.success = true;
                break;
            }
        }
    }
    return r;
}

DemoDisplacementStats demo_displacements(const std::vector<RelabeledSample>& samples,
                                         const std::vector<Trajectory>& trajs) {
    std::unordered_map<std::string, const Trajectory*> by_id;
    for (const auto& t : trajs) {
        by_id[t.id] = &t;
    }
    std::vector<double> refine;
    std::vector<double> skip;
    for (const auto& s : samples) {
        if (s.mode == SampleMode::skip_tail || s.mask.empty() || s.mask[0] == 0) {
            continue;
        }
        const auto it = by_id.find(s.episode_id);
        if (it == by_id.end()) {
            throw std::invalid_argument("demo_displacements: unknown episode '" + s.episode_id + "'");
        }
        const auto p = it->second->ee_pos.row(static_cast<std::size_t>(s.t - 1));
        const auto a = s.chunk.row(0);
        double d2 = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            d2 += (a[j] - p[j]) * (a[j] - p[j]);
        }
        (s.mode == SampleMode::refine ? refine : skip).push_back(std::sqrt(d2));
    }
    return {median(refine), median(skip)};
}

void classify_calls(RolloutResult& result, double threshold) {
    result.call_modes.clear();
    for (double j : result.jump_distances) {
        result.call_modes.push_back(j > threshold ? CallMode::skip : CallMode::key);
    }
}

double separation_score(const std::vector<double>& values, double threshold) {
    const auto n = static_cast<double>(values.size());
    if (values.empty()) {
        return 0.0;
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double total = 0.0;
    double sum_key = 0.0;
    double sum_skip = 0.0;
    double n_key = 0.0;
    for (double v : values) {
        total += (v - mean) * (v - mean);
        if (v > threshold) {
            sum_skip += v;
        } else {
            sum_key += v;
            n_key += 1.0;
        }
    }
    const double n_skip = n - n_key;
    if (n_key == 0.0 || n_skip == 0.0 || total <= 0.0) {
        return 0.0;
    }
    const double mk = sum_key / n_key;
    const double ms = sum_skip / n_skip;
    const double between = n_key * (mk - mean) * (mk - mean) + n_skip * (ms - mean) * (ms - mean);
    return between / total;
}

JumpReport jump_stats(const std::vector<RolloutResult>& results, const DemoDisplacementStats& demo) {
    JumpReport rep;
    rep.threshold = demo.threshold();
    std::vector<double> all;
    std::vector<double> key;
    std::vector<double> skip;
    for (const auto& r : results) {
        for (double j : r.jump_distances) {
            all.push_back(j);
            (j > rep.threshold ? skip : key).push_back(j);
        }
    }
    if (all.size() < 2) {
        throw std::invalid_argument("jump_stats: need at least 2 policy calls");
    }
    rep.key_count = static_cast<int>(key.size());
    rep.skip_count = static_cast<int>(skip.size());
    if (!key.empty()) {
        rep.key_median = median(key);
    }
    if (!skip.empty()) {
        rep.skip_median = median(skip);
    }
    rep.separation = separation_score(all, rep.threshold);
    return rep;
}

SuiteMetrics eval_suite(const PolicyIndex& index, const std::vector<TaskInstance>& suite, int budget) {
    if (suite.empty()) {
        throw std::invalid_argument("eval_suite: empty suite");
    }
    // Rollouts are independent and the index is read-only; results keep suite
    // order so the aggregate does not depend on scheduling.
    std::vector<RolloutResult> results(suite.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < suite.size(); i = next++) {
            results[i] = rollout(index, suite[i], budget, "eval_" + std::to_string(i));
        }
    };
    const auto n_threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, suite.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_threads; ++w) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }

    SuiteMetrics m;
    double succ_steps = 0.0;
    int succ = 0;
    for (auto& r : results) {
        m.steps += r.steps;
        m.forward_calls += r.forward_calls;
        if (r.success) {
            ++succ;
            succ_steps += r.steps;
        }
        m.jumps.insert(m.jumps.end(), r.jump_distances.begin(), r.jump_distances.end());
        m.results.push_back(std::move(r));
    }
    const auto n = static_cast<double>(suite.size());
    m.sr = succ / n;
    m.steps /= n;
    m.forward_calls /= n;
    if (succ > 0) {
        m.steps_succ = succ_steps / succ;
    }
    return m;
}

std::string metrics_json(const SuiteMetrics& m, const JumpReport& jumps) {
    nlohmann::json j;
    j["sr"] = m.sr;
    j["steps"] = m.steps;
    j["steps_succ"] = optional_json(m.steps_succ);
    j["forward_calls"] = m.forward_calls;
    j["jump"] = {{"key_median", optional_json(jumps.key_median)},
                 {"skip_median", optional_json(jumps.skip_median)},
                 {"separation", jumps.separation}};
    return j.dump(2) + "\n";
}

std::string jump_histogram_csv(const std::vector<RolloutResult>& results, int bins) {
    if (bins < 1) {
        throw std::invalid_argument("histogram needs at least one bin");
    }
    double hi = 0.0;
    for (const auto& r : results) {
        for (double j : r.jump_distances) {
            hi = std::max(hi, j);
        }
    }
    const double width = hi > 0.0 ? hi / bins : 1.0;
    std::vector<int> key(static_cast<std::size_t>(bins), 0);
    std::vector<int> skip(static_cast<std::size_t>(bins), 0);
    for (const auto& r : results) {
        if (r.call_modes.size() != r.jump_distances.size()) {
            throw std::invalid_argument("histogram: rollout calls are not classified");
        }
        for (std::size_t c = 0; c < r.jump_distances.size(); ++c) {
            const auto b = std::min(static_cast<std::size_t>(r.jump_distances[c] / width), key.size() - 1);
            ++(r.call_modes[c] == CallMode::skip ? skip : key)[b];
        }
    }
    std::ostringstream out;
    out.precision(17);
    out << "bin_lo,bin_hi,count_key,count_skip\n";
    for (int b = 0; b < bins; ++b) {
        out << b * width << ',' << (b + 1) * width << ',' << key[static_cast<std::size_t>(b)] << ','
            << skip[static_cast<std::size_t>(b)] << '\n';
    }
    return out.str();
}

}  // namespace skipkit
