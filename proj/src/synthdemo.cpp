#include "skipkit/synthdemo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "json_util.hpp"
#include "skipkit/dataset_io.hpp"
#include "skipkit/rng.hpp"

namespace skipkit {

namespace {

constexpr double kWorkspaceMargin = 0.1;
constexpr int kMinEpisode = 150;
constexpr int kMaxEpisode = 500;
constexpr int kMaxTaskAttempts = 100000;
constexpr int kMinInnerLegSteps = 12;
constexpr double kMinGraspRatio = 0.20;
constexpr double kMaxGraspRatio = 0.30;

// pause_grasp: decelerating approach, stationary pause, accelerating retreat.
constexpr int kApproachSteps = 7;
constexpr int kPauseSteps = 5;
// The gripper flips on pause point 1, 2 or 3 (0-based), drawn per demo.
constexpr int kMinToggleAt = 1;
constexpr int kMaxToggleAt = 3;
constexpr double kPauseExtent = 0.04;
constexpr double kPauseDither = 0.001;

// zigzag: alternating lateral strokes around a bent progress line.
constexpr int kZigzagHalfSteps = 20;
constexpr double kZigzagExtent = 0.06;
constexpr double kZigzagAmplitude = 0.0014;

// arc: constant-speed circular arc through the site center.
constexpr double kArcHalfAngle = std::numbers::pi / 3.0;
constexpr double kArcExtent = 0.10;  // chord between arc endpoints
constexpr double kArcStep = 0.0035;

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 unit_or(const Vec3& v, const Vec3& fallback) {
    const double n = norm(v);
    return n > 1e-12 ? scale(v, 1.0 / n) : fallback;
}

Vec3 direction(const Vec3& from, const Vec3& to) { return unit_or(sub(to, from), {1.0, 0.0, 0.0}); }

Vec3 lateral(const Vec3& u) {
    const Vec3 w = cross(u, {0.0, 0.0, 1.0});
    if (norm(w) > 1e-6) {
        return unit_or(w, {0.0, 1.0, 0.0});
    }
    return unit_or(cross(u, {1.0, 0.0, 0.0}), {0.0, 1.0, 0.0});
}

Vec3 clamp_workspace(Vec3 p) {
    for (auto& x : p) {
        x = std::clamp(x, 0.0, 1.0);
    }
    return p;
}

double site_extent(Pattern p) {
    switch (p) {
        case Pattern::zigzag: return kZigzagExtent;
        case Pattern::pause_grasp: return kPauseExtent;
        case Pattern::arc: return kArcExtent;
    }
    return 0.0;
}

std::vector<Pattern> suite_patterns(const std::string& suite) {
    if (suite == "reach") return {};
    if (suite == "grasp-place") return {Pattern::pause_grasp, Pattern::pause_grasp};
    if (suite == "sweep") return {Pattern::zigzag, Pattern::zigzag};
    if (suite == "multi-pick") return {Pattern::pause_grasp, Pattern::pause_grasp, Pattern::pause_grasp, Pattern::pause_grasp};
    if (suite == "trace") return {Pattern::arc, Pattern::arc};
    throw std::invalid_argument("unknown suite '" + suite + "'");
}

std::uint64_t suite_salt(const std::string& suite) {
    const auto& suites = known_suites();
    return static_cast<std::uint64_t>(std::find(suites.begin(), suites.end(), suite) - suites.begin());
}

// Flattened episode under construction.
struct Plan {
    std::vector<Vec3> points;
    std::vector<Gripper> gripper;
    std::vector<std::uint8_t> contact;
    std::vector<std::uint8_t> noisy;  // interior transit points receive position noise
    std::vector<int> keyframes;       // 1-based

    void push(const Vec3& p, Gripper g, bool is_contact, bool is_noisy) {
        points.push_back(p);
        gripper.push_back(g);
        contact.push_back(is_contact ? 1 : 0);
        noisy.push_back(is_noisy ? 1 : 0);
    }
    [[nodiscard]] int size() const { return static_cast<int>(points.size()); }
    [[nodiscard]] const Vec3& last() const { return points.back(); }
    [[nodiscard]] Gripper last_gripper() const { return gripper.back(); }
};

void transit(Plan& plan, const Vec3& to) {
    const Vec3 from = plan.last();
    const int n = std::max(1, static_cast<int>(std::lround(norm(sub(to, from)) / kTransitStep)));
    for (int k = 1; k <= n; ++k) {
        const Vec3 p = k == n ? to : add(from, scale(sub(to, from), static_cast<double>(k) / n));
        plan.push(p, plan.last_gripper(), false, k < n);
    }
}

// Progress fractions for n steps whose lengths ramp linearly from `first` to
// `last` (relative units), normalized to end at 1.
std::vector<double> ramp_progress(int n, double first, double last) {
    std::vector<double> cum(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        total += first + (last - first) * f;
        cum[static_cast<std::size_t>(i)] = total;
    }
    for (auto& c : cum) {
        c /= total;
    }
    return cum;
}

void pause_grasp(Plan& plan, const ContactSite& site, const Vec3& u_in, const Vec3& u_out, Rng& rng) {
    const double half = site.extent / 2.0;
    const Vec3 entry = plan.last();
    const Vec3 w_in = lateral(u_in);
    const Vec3 w_out = lateral(u_out);
    Gripper g = plan.last_gripper();

    const auto approach = ramp_progress(kApproachSteps, 1.1, 0.9);
    for (int i = 0; i < kApproachSteps; ++i) {
        if (i + 1 == kApproachSteps) {
            plan.push(site.center, g, true, false);
            break;
        }
        const double sign = i % 2 == 0 ? 1.0 : -1.0;
        const double dither = sign * kPauseDither * rng.uniform(0.8, 1.2);
        plan.push(add(add(entry, scale(u_in, half * approach[static_cast<std::size_t>(i)])), scale(w_in, dither)), g,
                  true, false);
    }
    plan.keyframes.push_back(plan.size() + 1);
    const int toggle_at = kMinToggleAt + static_cast<int>(rng.uniform() * (kMaxToggleAt - kMinToggleAt + 1));
    for (int i = 0; i < kPauseSteps; ++i) {
        if (i == toggle_at) {
            g = g == Gripper::open ? Gripper::closed : Gripper::open;
            plan.keyframes.push_back(plan.size() + 1);
        }
        plan.push(site.center, g, true, false);
    }
    const auto retreat = ramp_progress(kApproachSteps, 0.9, 1.1);
    for (int i = 0; i < kApproachSteps; ++i) {
        const Vec3 along = add(site.center, scale(u_out, half * retreat[static_cast<std::size_t>(i)]));
        if (i + 1 == kApproachSteps) {
            plan.push(along, g, true, false);
            break;
        }
        const double sign = i % 2 == 0 ? 1.0 : -1.0;
        plan.push(add(along, scale(w_out, sign * kPauseDither * rng.uniform(0.8, 1.2))), g, true, false);
    }
}

void zigzag(Plan& plan, const ContactSite& site, const Vec3& u_in, const Vec3& u_out, Rng& rng) {
    const double half = site.extent / 2.0;
    const Vec3 entry = plan.last();
    const Gripper g = plan.last_gripper();
    // Forward progress slows toward the center and speeds up after it.
    const auto in = ramp_progress(kZigzagHalfSteps, 1.4, 0.6);
    const auto out = ramp_progress(kZigzagHalfSteps, 0.6, 1.4);
    const Vec3 w_in = lateral(u_in);
    const Vec3 w_out = lateral(u_out);
    for (int i = 0; i < kZigzagHalfSteps; ++i) {
        if (i + 1 == kZigzagHalfSteps) {
            plan.push(site.center, g, true, false);
            break;
        }
        const double sign = i % 2 == 0 ? 1.0 : -1.0;
        const Vec3 along = add(entry, scale(u_in, half * in[static_cast<std::size_t>(i)]));
        plan.push(add(along, scale(w_in, sign * kZigzagAmplitude * rng.uniform(0.85, 1.15))), g, true, false);
    }
    for (int i = 0; i < kZigzagHalfSteps; ++i) {
        const Vec3 along = add(site.center, scale(u_out, half * out[static_cast<std::size_t>(i)]));
        if (i + 1 == kZigzagHalfSteps) {
            plan.push(along, g, true, false);
            break;
        }
        const double sign = i % 2 == 0 ? 1.0 : -1.0;
        plan.push(add(along, scale(w_out, sign * kZigzagAmplitude * rng.uniform(0.85, 1.15))), g, true, false);
    }
}

struct ArcGeometry {
    Vec3 origin;
    Vec3 u;
    Vec3 w;
    double radius;
    int steps;

    [[nodiscard]] Vec3 at(double theta) const {
        return add(origin, add(scale(w, radius * std::cos(theta)), scale(u, radius * std::sin(theta))));
    }
};

ArcGeometry arc_geometry(const ContactSite& site, const Vec3& u_in) {
    const double radius = site.extent / (2.0 * std::sin(kArcHalfAngle));
    const double length = 2.0 * kArcHalfAngle * radius;
    int steps = static_cast<int>(std::ceil(length / kArcStep));
    steps += steps % 2;  // even, so a point lands on the apex
    const Vec3 w = lateral(u_in);
    return {sub(site.center, scale(w, radius)), u_in, w, radius, steps};
}

void arc(Plan& plan, const ArcGeometry& geo) {
    const Gripper g = plan.last_gripper();
    for (int i = 1; i <= geo.steps; ++i) {
        if (2 * i == geo.steps) {
            plan.push(add(geo.origin, scale(geo.w, geo.radius)), g, true, false);
            continue;
        }
        const double theta = -kArcHalfAngle + 2.0 * kArcHalfAngle * i / geo.steps;
        plan.push(geo.at(theta), g, true, false);
    }
}

Plan build_plan(const TaskInstance& task, Rng& rng) {
    Plan plan;
    plan.push(task.start, Gripper::open, false, false);
    for (std::size_t s = 0; s < task.sites.size(); ++s) {
        const auto& site = task.sites[s];
        const Vec3 next_anchor = s + 1 < task.sites.size() ? task.sites[s + 1].center : task.goal;
        const Vec3 u_in = direction(plan.last(), site.center);
        const Vec3 u_out = direction(site.center, next_anchor);
        switch (site.pattern) {
            case Pattern::pause_grasp:
                transit(plan, sub(site.center, scale(u_in, site.extent / 2.0)));
                pause_grasp(plan, site, u_in, u_out, rng);
                break;
            case Pattern::zigzag:
                transit(plan, sub(site.center, scale(u_in, site.extent / 2.0)));
                zigzag(plan, site, u_in, u_out, rng);
                break;
            case Pattern::arc: {
                const auto geo = arc_geometry(site, u_in);
                transit(plan, geo.at(-kArcHalfAngle));
                arc(plan, geo);
                break;
            }
        }
    }
    transit(plan, task.goal);
    return plan;
}

Vec3 sample_point(Rng& rng) {
    return {rng.uniform(kWorkspaceMargin, 1.0 - kWorkspaceMargin), rng.uniform(kWorkspaceMargin, 1.0 - kWorkspaceMargin),
            rng.uniform(kWorkspaceMargin, 1.0 - kWorkspaceMargin)};
}

bool separated(const std::vector<ContactSite>& sites) {
    for (std::size_t i = 0; i < sites.size(); ++i) {
        for (std::size_t j = i + 1; j < sites.size(); ++j) {
            if (norm(sub(sites[i].center, sites[j].center)) < kMinSiteSeparation) {
                return false;
            }
        }
    }
    return true;
}

// Shape constraints that keep transit dominant and every contact clear of the
// excluded episode head.
bool acceptable(const TaskInstance& task) {
    if (task.sites.empty()) {
        return norm(sub(task.goal, task.start)) >= 0.5;
    }
    if (!separated(task.sites) || norm(sub(task.goal, task.sites.back().center)) < kMinSiteSeparation ||
        norm(sub(task.start, task.sites.front().center)) < kMinSiteSeparation) {
        return false;
    }
    Rng dummy(0);
    const Plan plan = build_plan(task, dummy);
    const int T = plan.size();
    if (T < kMinEpisode || T > kMaxEpisode) {
        return false;
    }
    if (task.suite == "grasp-place") {
        const double contact = static_cast<double>(std::count(plan.contact.begin(), plan.contact.end(), std::uint8_t{1}));
        const double ratio = contact / (T - static_cast<int>(0.2 * T));
        if (ratio < kMinGraspRatio || ratio > kMaxGraspRatio) {
            return false;
        }
    }
    // Transit legs between contacts long enough that neighboring patterns do
    // not share a DCT window.
    int leg = 0;
    bool seen_contact = false;
    for (std::size_t i = 0; i < plan.contact.size(); ++i) {
        if (plan.contact[i] != 0) {
            if (seen_contact && leg > 0 && leg < kMinInnerLegSteps) {
                return false;
            }
            seen_contact = true;
            leg = 0;
        } else {
            ++leg;
        }
    }
    const auto first_contact = std::find(plan.contact.begin(), plan.contact.end(), std::uint8_t{1}) - plan.contact.begin();
    // 0.2 head plus room for one window half.
    return static_cast<int>(first_contact) >= static_cast<int>(0.2 * T) + 8;
}

nlohmann::json vec_to_json(const Vec3& v) { return {v[0], v[1], v[2]}; }
Vec3 vec_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw std::invalid_argument("expected a 3-vector");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string to_string(Pattern p) {
    switch (p) {
        case Pattern::zigzag: return "zigzag";
        case Pattern::pause_grasp: return "pause_grasp";
        case Pattern::arc: return "arc";
    }
    return "unknown";
}

Pattern pattern_from_string(const std::string& name) {
    for (auto p : {Pattern::zigzag, Pattern::pause_grasp, Pattern::arc}) {
        if (to_string(p) == name) {
            return p;
        }
    }
    throw std::invalid_argument("unknown pattern '" + name + "'");
}

const std::vector<std::string>& known_suites() {
    static const std::vector<std::string> suites{"reach", "grasp-place", "sweep", "multi-pick", "trace"};
    return suites;
}

void validate(const TaskInstance& task) {
    const auto inside = [](const Vec3& p) {
        return std::all_of(p.begin(), p.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
    };
    const std::string where = "task '" + task.suite + "' seed " + std::to_string(task.seed) + ": ";
    if (!inside(task.start) || !inside(task.goal)) {
        throw InvariantError(where + "start/goal inside unit workspace violated");
    }
    if (task.sites.size() > static_cast<std::size_t>(kMaxSites)) {
        throw InvariantError(where + "at most 4 contact sites violated");
    }
    if (!(task.goal_tolerance > 0.0)) {
        throw InvariantError(where + "goal_tolerance > 0 violated");
    }
    for (const auto& s : task.sites) {
        if (!inside(s.center)) {
            throw InvariantError(where + "site inside unit workspace violated");
        }
        if (!(s.tolerance > 0.0) || !(s.extent > 0.0)) {
            throw InvariantError(where + "site tolerance and extent > 0 violated");
        }
    }
}

TaskInstance gen_task(std::uint64_t seed, const std::string& suite) {
    const auto patterns = suite_patterns(suite);
    Rng rng(mix_seed(seed, suite_salt(suite)));
    for (int attempt = 0; attempt < kMaxTaskAttempts; ++attempt) {
        TaskInstance task;
        task.suite = suite;
        task.seed = seed;
        task.start = sample_point(rng);
        for (auto p : patterns) {
            task.sites.push_back({sample_point(rng), p, site_extent(p), kSiteTolerance});
        }
        task.goal = sample_point(rng);
        task.goal_tolerance = kGoalTolerance;
        if (acceptable(task)) {
            return task;
        }
    }
    throw std::runtime_error("gen_task: no acceptable '" + suite + "' instance for seed " + std::to_string(seed));
}

TaskInstance perturb_task(const TaskInstance& base, double jitter, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x7e57));
    TaskInstance out = base;
    out.seed = seed;
    const auto shake = [&](Vec3& p) {
        for (auto& x : p) {
            x += rng.uniform(-jitter, jitter);
        }
        p = clamp_workspace(p);
    };
    shake(out.start);
    for (auto& s : out.sites) {
        shake(s.center);
    }
    shake(out.goal);
    return out;
}

Demo gen_expert(const TaskInstance& task, double noise, std::uint64_t seed, const std::string& id) {
    if (!(noise >= 0.0)) {
        throw std::invalid_argument("gen_expert: noise must be >= 0");
    }
    validate(task);
    Rng rng(seed);
    Plan plan = build_plan(task, rng);
    if (noise > 0.0) {
        for (std::size_t i = 0; i < plan.points.size(); ++i) {
            if (plan.noisy[i] != 0) {
                for (auto& x : plan.points[i]) {
                    x += noise * rng.normal();
                }
                plan.points[i] = clamp_workspace(plan.points[i]);
            }
        }
    }

    const auto T = plan.points.size();
    Demo demo;
    demo.traj.id = id;
    demo.traj.actions = Matrix(T, 3);
    demo.traj.ee_pos = Matrix(T, 3);
    demo.traj.observations = Matrix(T, kObservationDim);
    demo.traj.gripper = plan.gripper;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < 3; ++j) {
            demo.traj.actions(t, j) = plan.points[t][j];
            demo.traj.ee_pos(t, j) = plan.points[t][j];
        }
        const auto obs = make_observation(task, plan.points[t], plan.gripper[t]);
        std::copy(obs.begin(), obs.end(), demo.traj.observations.row(t).begin());
    }
    demo.truth.true_segments = SegmentSet::from_mask(id, plan.contact);
    demo.truth.scripted_keyframes = plan.keyframes;
    return demo;
}

std::vector<double> make_observation(const TaskInstance& task, const Vec3& position, Gripper gripper) {
    std::vector<double> obs;
    obs.reserve(kObservationDim);
    obs.insert(obs.end(), position.begin(), position.end());
    obs.push_back(gripper == Gripper::closed ? 1.0 : 0.0);
    for (int s = 0; s < kMaxSites; ++s) {
        if (static_cast<std::size_t>(s) < task.sites.size()) {
            const auto& site = task.sites[static_cast<std::size_t>(s)];
            obs.insert(obs.end(), site.center.begin(), site.center.end());
            obs.push_back(static_cast<double>(site.pattern));
            obs.push_back(site.extent);
            obs.push_back(site.tolerance);
        } else {
            obs.insert(obs.end(), 6, 0.0);
        }
    }
    obs.insert(obs.end(), task.goal.begin(), task.goal.end());
    return obs;
}

void save_tasks(const std::vector<TaskInstance>& tasks, const std::filesystem::path& path) {
    std::string out;
    for (const auto& task : tasks) {
        nlohmann::json j;
        j["suite"] = task.suite;
        j["seed"] = task.seed;
        j["start"] = vec_to_json(task.start);
        auto sites = nlohmann::json::array();
        for (const auto& s : task.sites) {
            sites.push_back({{"center", vec_to_json(s.center)},
                             {"pattern", to_string(s.pattern)},
                             {"extent", s.extent},
                             {"tolerance", s.tolerance}});
        }
        j["contact_sites"] = std::move(sites);
        j["goal"] = vec_to_json(task.goal);
        j["goal_tolerance"] = task.goal_tolerance;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<TaskInstance> load_tasks(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    std::vector<TaskInstance> tasks;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        TaskInstance task;
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            task.suite = j.at("suite").get<std::string>();
            task.seed = j.at("seed").get<std::uint64_t>();
            task.start = vec_from_json(j.at("start"));
            for (const auto& s : j.at("contact_sites")) {
                task.sites.push_back({vec_from_json(s.at("center")), pattern_from_string(s.at("pattern").get<std::string>()),
                                      s.at("extent").get<double>(), s.at("tolerance").get<double>()});
            }
            task.goal = vec_from_json(j.at("goal"));
            task.goal_tolerance = j.at("goal_tolerance").get<double>();
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
        validate(task);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

void save_ground_truth(const std::vector<GroundTruth>& truth, const std::filesystem::path& path) {
    std::string out;
    for (const auto& gt : truth) {
        nlohmann::json j;
        j["id"] = gt.true_segments.episode_id();
        j["true_segments"] = detail::segments_to_json(gt.true_segments.segments());
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
    const auto lines = read_lines(path);
    std::vector<GroundTruth> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            const auto id = j.at("id").get<std::string>();
            const auto it = std::find_if(trajs.begin(), trajs.end(), [&](const Trajectory& t) { return t.id == id; });
            if (it == trajs.end()) {
                throw std::invalid_argument("unknown episode id '" + id + "'");
            }
            out.push_back({SegmentSet::from_segments(id, it->length(), detail::segments_from_json(j.at("true_segments"))), {}});
        } catch (const InvariantError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace skipkit
