#include "skipkit/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "skipkit/dataset_io.hpp"
#include "skipkit/experiment.hpp"
#include "skipkit/rng.hpp"

namespace skipkit {

namespace {

constexpr std::uint64_t kEvalDemoSalt = 0x4000;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using nlohmann::json;

json msk_to_json(const MskConfig& m) {
    return {{"window", m.window},
            {"quantile", m.quantile},
            {"min_seg_len", m.min_seg_len},
            {"bend_cutoff", m.bend_cutoff},
            {"bend_expand", m.bend_expand},
            {"kf_neighborhood", m.kf_neighborhood},
            {"head_exclude_frac", m.head_exclude_frac},
            {"use_bend", m.use_bend},
            {"use_keyframes", m.use_keyframes}};
}

json config_json(const RunConfig& c) {
    json j;
    j["suite"] = c.suite;
    j["n_train"] = c.n_train;
    j["n_eval"] = c.n_eval;
    j["seed"] = c.seed;
    j["noise"] = c.noise;
    j["jitter"] = c.jitter;
    j["msk"] = msk_to_json(c.msk);
    j["labeler"] = to_string(c.labeler);
    j["H"] = c.horizon ? json(*c.horizon) : json("auto");
    j["k"] = c.k;
    j["budget"] = c.budget;
    j["key_ratio"] = c.key_ratio;
    j["seg_len"] = c.seg_len;
    j["compare"] = c.compare;
    j["profiles"] = c.profiles;
    j["output_dir"] = c.output_dir.string();
    return j;
}

std::optional<int> parse_horizon(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() != "auto") {
            throw UsageError("H must be a positive integer or \"auto\"");
        }
        return std::nullopt;
    }
    return j.get<int>();
}

std::optional<int> parse_horizon(const std::string& s) {
    if (s == "auto") {
        return std::nullopt;
    }
    try {
        std::size_t used = 0;
        const int h = std::stoi(s, &used);
        if (used == s.size()) {
            return h;
        }
    } catch (const std::exception&) {
    }
    throw UsageError("H must be a positive integer or \"auto\", got '" + s + "'");
}

void apply_json(RunConfig& c, const json& j) {
    if (!j.is_object()) {
        throw UsageError("config file must hold a JSON object");
    }
    for (const auto& [key, v] : j.items()) {
        if (key == "suite") c.suite = v.get<std::string>();
        else if (key == "n_train") c.n_train = v.get<int>();
        else if (key == "n_eval") c.n_eval = v.get<int>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "noise") c.noise = v.get<double>();
        else if (key == "jitter") c.jitter = v.get<double>();
        else if (key == "labeler") c.labeler = labeler_from_string(v.get<std::string>());
        else if (key == "H") c.horizon = parse_horizon(v);
        else if (key == "k") c.k = v.get<int>();
        else if (key == "budget") c.budget = v.get<int>();
        else if (key == "key_ratio") c.key_ratio = v.get<double>();
        else if (key == "seg_len") c.seg_len = v.get<int>();
        else if (key == "compare") c.compare = v.get<std::string>();
        else if (key == "profiles") c.profiles = v.get<bool>();
        else if (key == "output_dir") c.output_dir = v.get<std::string>();
        else if (key == "msk") {
            for (const auto& [mk, mv] : v.items()) {
                auto& m = c.msk;
                if (mk == "window") m.window = mv.get<int>();
                else if (mk == "quantile") m.quantile = mv.get<double>();
                else if (mk == "min_seg_len") m.min_seg_len = mv.get<int>();
                else if (mk == "bend_cutoff") m.bend_cutoff = mv.get<double>();
                else if (mk == "bend_expand") m.bend_expand = mv.get<int>();
                else if (mk == "kf_neighborhood") m.kf_neighborhood = mv.get<int>();
                else if (mk == "head_exclude_frac") m.head_exclude_frac = mv.get<double>();
                else if (mk == "use_bend") m.use_bend = mv.get<bool>();
                else if (mk == "use_keyframes") m.use_keyframes = mv.get<bool>();
                else throw UsageError("unknown config key 'msk." + mk + "'");
            }
        } else {
            throw UsageError("unknown config key '" + key + "'");
        }
    }
}

void check_config(const RunConfig& c) {
    c.msk.validate();
    if (c.n_train < 1 || c.n_eval < 1) {
        throw UsageError("n_train and n_eval must be >= 1");
    }
    if (!(c.noise >= 0.0) || !(c.jitter >= 0.0)) {
        throw UsageError("noise and jitter must be >= 0");
    }
    if (c.horizon && *c.horizon < 1) {
        throw UsageError("H must be >= 1");
    }
    if (c.k < 1 || c.budget < 0) {
        throw UsageError("k must be >= 1 and budget >= 0");
    }
    if (!(c.key_ratio > 0.0 && c.key_ratio < 1.0) || c.seg_len < 1) {
        throw UsageError("key_ratio must lie in (0, 1) and seg_len >= 1");
    }
    if (!c.compare.empty() && c.compare != "dense") {
        throw UsageError("--compare only accepts 'dense'");
    }
}

std::vector<std::string> split_suites(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        if (item.empty()) {
            continue;
        }
        const auto& known = known_suites();
        if (std::find(known.begin(), known.end(), item) == known.end()) {
            throw UsageError("unknown suite '" + item + "'");
        }
        out.push_back(item);
    }
    if (out.empty()) {
        throw UsageError("no suite given");
    }
    return out;
}

std::string fmt(double x, int digits = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << x;
    return s.str();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Paths {
    std::filesystem::path dir;
    [[nodiscard]] std::filesystem::path operator()(const std::string& name) const { return dir / name; }
};

void finish(const RunConfig& cfg, const std::string& cmd, const json& summary) {
    write_file_atomic(cfg.output_dir / ("config_" + cmd + ".json"), config_json(cfg).dump(2) + "\n");
    write_file_atomic(cfg.output_dir / (cmd + "_summary.json"), summary.dump(2) + "\n");
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir.string() + "'");
    }
}

double mean_length(const std::vector<Trajectory>& trajs) {
    double s = 0.0;
    for (const auto& t : trajs) {
        s += t.length();
    }
    return trajs.empty() ? 0.0 : s / static_cast<double>(trajs.size());
}

struct SegStats {
    double key_ratio = 0.0;
    double mean_seg_len = 0.0;
    double segments_per_episode = 0.0;
};

SegStats seg_stats(const std::vector<SegmentSet>& segs, double head_frac) {
    SegStats st;
    double len = 0.0;
    std::size_t n = 0;
    for (const auto& s : segs) {
        st.key_ratio += key_ratio(s, head_frac);
        for (const auto& g : s.segments()) {
            len += g.length();
            ++n;
        }
    }
    if (!segs.empty()) {
        st.key_ratio /= static_cast<double>(segs.size());
        st.segments_per_episode = static_cast<double>(n) / static_cast<double>(segs.size());
    }
    st.mean_seg_len = n == 0 ? 0.0 : len / static_cast<double>(n);
    return st;
}

int cmd_gen(const RunConfig& cfg, std::ostream& out) {
    const auto suites = split_suites(cfg.suite);
    if (cfg.n_train % static_cast<int>(suites.size()) != 0) {
        throw UsageError("n_train must be a multiple of the number of suites");
    }
    const auto train =
        make_train_set(suites, cfg.n_train / static_cast<int>(suites.size()), cfg.noise, cfg.seed);
    const auto eval_tasks = make_eval_tasks(train.tasks, cfg.n_eval, cfg.jitter, cfg.seed);
    std::vector<Trajectory> eval_trajs;
    std::vector<GroundTruth> eval_truth;
    for (std::size_t i = 0; i < eval_tasks.size(); ++i) {
        auto demo = gen_expert(eval_tasks[i], cfg.noise, mix_seed(cfg.seed, kEvalDemoSalt + i),
                               "eval_" + std::to_string(i));
        eval_trajs.push_back(std::move(demo.traj));
        eval_truth.push_back(std::move(demo.truth));
    }

    ensure_dir(cfg.output_dir);
    const Paths p{cfg.output_dir};
    save_dataset(train.trajs, p("train.jsonl"));
    save_ground_truth(train.truth, p("train_gt.jsonl"));
    save_tasks(train.tasks, p("train_tasks.jsonl"));
    save_dataset(eval_trajs, p("eval.jsonl"));
    save_ground_truth(eval_truth, p("eval_gt.jsonl"));
    save_tasks(eval_tasks, p("eval_tasks.jsonl"));

    const double mean_len = mean_length(train.trajs);
    out << "gen: " << train.trajs.size() << " training episodes, mean length " << fmt(mean_len, 1) << "; "
        << eval_tasks.size() << " evaluation tasks\n";
    finish(cfg, "gen", {{"episodes", train.trajs.size()}, {"mean_length", mean_len}, {"eval_tasks", eval_tasks.size()}});
    return 0;
}

LabelerSpec labeler_spec(const RunConfig& cfg) {
    return {cfg.labeler, cfg.msk, cfg.key_ratio, cfg.seg_len};
}

int cmd_segment(const RunConfig& cfg, std::ostream& out) {
    if (cfg.labeler == Labeler::dense) {
        throw UsageError("the dense arm has no segmentation; use 'relabel --labeler dense'");
    }
    const Paths p{cfg.output_dir};
    const auto trajs = load_dataset(p("train.jsonl"));
    const auto segs = label_dataset(trajs, labeler_spec(cfg));
    save_segments(segs, cfg.labeler, cfg.msk.head_exclude_frac, p("segments.jsonl"));
    if (cfg.profiles) {
        ensure_dir(p("profiles"));
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            write_file_atomic(p("profiles") / (trajs[i].id + ".csv"),
                              profile_csv(spectral_profile(trajs[i], cfg.msk), segs[i]));
        }
    }

    const auto st = seg_stats(segs, cfg.msk.head_exclude_frac);
    json summary{{"labeler", to_string(cfg.labeler)},
                 {"episodes", segs.size()},
                 {"segments_per_episode", st.segments_per_episode},
                 {"mean_segment_length", st.mean_seg_len},
                 {"key_ratio", st.key_ratio}};
    out << "segment: " << to_string(cfg.labeler) << ", " << segs.size() << " episodes, "
        << fmt(st.segments_per_episode, 2) << " segments/episode, avg seg len " << fmt(st.mean_seg_len, 1)
        << ", key ratio " << fmt(st.key_ratio);
    if (std::filesystem::exists(p("train_gt.jsonl"))) {
        const auto truth = load_ground_truth(p("train_gt.jsonl"), trajs);
        double iou = 0.0;
        for (std::size_t i = 0; i < segs.size() && i < truth.size(); ++i) {
            iou += mask_iou(segs[i], truth[i].true_segments);
        }
        iou /= static_cast<double>(std::max<std::size_t>(1, segs.size()));
        summary["mean_iou_vs_ground_truth"] = iou;
        out << ", IoU vs ground truth " << fmt(iou);
    }
    out << "\n";
    finish(cfg, "segment", summary);
    return 0;
}

int cmd_relabel(const RunConfig& cfg, std::ostream& out) {
    const Paths p{cfg.output_dir};
    const auto trajs = load_dataset(p("train.jsonl"));
    std::vector<RelabeledSample> samples;
    int horizon = 0;
    if (cfg.labeler == Labeler::dense) {
        if (cfg.horizon) {
            horizon = *cfg.horizon;
        } else {
            if (!std::filesystem::exists(p("segments.jsonl"))) {
                throw IoError("dense relabel with H=auto needs " + p("segments.jsonl").string() +
                              " (run segment first) or an explicit --H");
            }
            horizon = auto_horizon(load_segments(p("segments.jsonl"), trajs));
        }
        samples = dense_relabel_dataset(trajs, horizon);
    } else {
        const auto segs = load_segments(p("segments.jsonl"), trajs);
        horizon = cfg.horizon.value_or(auto_horizon(segs));
        samples = relabel_dataset(trajs, segs, horizon);
    }
    save_samples(samples, p("relabeled.jsonl"));

    std::size_t counts[3] = {0, 0, 0};
    for (const auto& s : samples) {
        ++counts[static_cast<int>(s.mode)];
    }
    out << "relabel: " << to_string(cfg.labeler) << ", H=" << horizon << (cfg.horizon ? "" : " (auto)") << ", "
        << samples.size() << " samples (refine " << counts[0] << ", skip " << counts[1] << ", skip_tail "
        << counts[2] << ")\n";
    finish(cfg, "relabel",
           {{"labeler", to_string(cfg.labeler)},
            {"H", horizon},
            {"samples", samples.size()},
            {"modes", {{"refine", counts[0]}, {"skip", counts[1]}, {"skip_tail", counts[2]}}}});
    return 0;
}

json arm_json(const SuiteMetrics& m, const JumpReport& j) { return json::parse(metrics_json(m, j)); }

void print_arm(std::ostream& out, const std::string& name, const SuiteMetrics& m, const JumpReport& j) {
    out << "  " << std::left << std::setw(6) << name << std::right << " SR " << fmt(m.sr) << "  Steps "
        << fmt(m.steps, 1) << "  Steps_succ " << (m.steps_succ ? fmt(*m.steps_succ, 1) : "n/a") << "  calls/ep "
        << fmt(m.forward_calls, 2) << "  jump key/skip median "
        << (j.key_median ? fmt(*j.key_median, 4) : "n/a") << "/" << (j.skip_median ? fmt(*j.skip_median, 4) : "n/a")
        << "  separation " << fmt(j.separation) << "\n";
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const Paths p{cfg.output_dir};
    const auto trajs = load_dataset(p("train.jsonl"));
    const auto samples = load_samples(p("relabeled.jsonl"));
    const auto tasks = load_tasks(p("eval_tasks.jsonl"));
    if (samples.empty()) {
        throw IoError("no samples in " + p("relabeled.jsonl").string());
    }
    const int budget = cfg.budget > 0 ? cfg.budget : default_budget(trajs);
    const int horizon = static_cast<int>(samples.front().chunk.rows());
    const auto demo_stats = demo_displacements(samples, trajs);

    const auto evaluate = [&](const std::vector<RelabeledSample>& s, const std::string& suffix) {
        auto m = eval_suite(build_index(s, trajs, cfg.k), tasks, budget);
        for (auto& r : m.results) {
            classify_calls(r, demo_stats.threshold());
        }
        const auto j = jump_stats(m.results, demo_stats);
        write_file_atomic(p("metrics" + suffix + ".json"), metrics_json(m, j));
        write_file_atomic(p("jumps" + suffix + ".csv"), jump_histogram_csv(m.results));
        return std::pair{m, j};
    };

    const auto [main_m, main_j] = evaluate(samples, "");
    out << "eval: " << tasks.size() << " tasks, budget " << budget << ", H=" << horizon << ", k=" << cfg.k << "\n";
    print_arm(out, to_string(cfg.labeler), main_m, main_j);
    json summary{{"labeler", to_string(cfg.labeler)},
                 {"tasks", tasks.size()},
                 {"budget", budget},
                 {"H", horizon},
                 {"jump_threshold", demo_stats.threshold()},
                 {"metrics", arm_json(main_m, main_j)}};
    if (cfg.compare == "dense") {
        const auto [dense_m, dense_j] = evaluate(dense_relabel_dataset(trajs, horizon), "_dense");
        print_arm(out, "dense", dense_m, dense_j);
        const double reduction = dense_m.steps > 0.0 ? 1.0 - main_m.steps / dense_m.steps : 0.0;
        out << "  step reduction vs dense: " << fmt(100.0 * reduction, 1) << "%\n";
        summary["dense"] = arm_json(dense_m, dense_j);
        summary["step_reduction"] = reduction;
    }
    finish(cfg, "eval", summary);
    return 0;
}

struct SweepRow {
    std::string value;
    LabelerSpec spec;
};

int cmd_sweep(const RunConfig& cfg, const std::string& axis, std::ostream& out) {
    const Paths p{cfg.output_dir};
    const auto trajs = load_dataset(p("train.jsonl"));
    const auto tasks = load_tasks(p("eval_tasks.jsonl"));
    const int budget = cfg.budget > 0 ? cfg.budget : default_budget(trajs);
    TrainSet train;
    train.trajs = trajs;

    const LabelerSpec base{Labeler::msk, cfg.msk, cfg.key_ratio, cfg.seg_len};
    std::vector<SweepRow> rows;
    if (axis == "q") {
        for (double q : {0.70, 0.75, 0.80, 0.85, 0.90}) {
            auto s = base;
            s.msk.quantile = q;
            rows.push_back({fmt(q, 2), s});
        }
    } else if (axis == "W") {
        for (int w : {4, 8, 16, 32}) {
            auto s = base;
            s.msk.window = w;
            rows.push_back({std::to_string(w), s});
        }
    } else if (axis == "components") {
        const std::pair<const char*, std::pair<bool, bool>> variants[] = {
            {"full", {true, true}}, {"w/o bend", {false, true}}, {"w/o union", {true, false}}, {"w/o both", {false, false}}};
        for (const auto& [name, flags] : variants) {
            auto s = base;
            s.msk.use_bend = flags.first;
            s.msk.use_keyframes = flags.second;
            rows.push_back({name, s});
        }
    } else if (axis == "labeler") {
        // Alternative sources share MSK's chunk length, and random segments
        // copy MSK's realized ratio and segment length, so only placement
        // differs between rows.
        const auto st = seg_stats(label_dataset(trajs, base), cfg.msk.head_exclude_frac);
        for (auto kind : {Labeler::msk, Labeler::rs, Labeler::vo, Labeler::lv}) {
            auto s = base;
            s.kind = kind;
            if (kind == Labeler::rs) {
                s.rs_key_ratio = std::clamp(st.key_ratio, 0.01, 0.99);
                s.rs_seg_len = std::max(1, static_cast<int>(std::lround(st.mean_seg_len)));
            }
            rows.push_back({to_string(kind), s});
        }
    } else {
        throw UsageError("unknown sweep axis '" + axis + "'");
    }

    std::optional<int> shared_h = cfg.horizon;
    if (axis == "labeler" && !shared_h) {
        shared_h = auto_horizon(label_dataset(trajs, base));
    }

    std::ostringstream csv;
    csv.precision(17);
    csv << axis << ",sr,steps,steps_succ,forward_calls,H,key_ratio\n";
    json table = json::array();
    out << "sweep " << axis << ": " << tasks.size() << " tasks, budget " << budget << "\n";
    for (const auto& row : rows) {
        const auto segs = label_dataset(trajs, row.spec);
        const int h = shared_h.value_or(auto_horizon(segs));
        const auto samples = relabel_dataset(trajs, segs, h);
        const auto m = eval_suite(build_index(samples, trajs, cfg.k), tasks, budget);
        const double kr = seg_stats(segs, row.spec.msk.head_exclude_frac).key_ratio;
        csv << row.value << ',' << m.sr << ',' << m.steps << ',';
        if (m.steps_succ) {
            csv << *m.steps_succ;
        }
        csv << ',' << m.forward_calls << ',' << h << ',' << kr << '\n';
        table.push_back({{"value", row.value},
                         {"sr", m.sr},
                         {"steps", m.steps},
                         {"steps_succ", optional_json(m.steps_succ)},
                         {"forward_calls", m.forward_calls},
                         {"H", h},
                         {"key_ratio", kr}});
        out << "  " << std::left << std::setw(10) << row.value << std::right << " SR " << fmt(m.sr) << "  Steps "
            << fmt(m.steps, 1) << "  Steps_succ " << (m.steps_succ ? fmt(*m.steps_succ, 1) : "n/a") << "  H " << h
            << "  key ratio " << fmt(kr) << "\n";
    }
    write_file_atomic(p("sweep_" + axis + ".csv"), csv.str());
    finish(cfg, "sweep_" + axis, {{"axis", axis}, {"rows", table}});
    return 0;
}

// Options are parsed into temporaries and only applied when given, so that
// flags override a config file without the file overriding flag defaults.
class FlagSet {
public:
    template <class T, class Apply>
    void add(CLI::App* app, const std::string& name, const std::string& desc, Apply apply) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(name, *value, desc);
        setters_.push_back([opt, value, apply](RunConfig& c) {
            if (opt->count() > 0) {
                apply(c, *value);
            }
        });
    }

    void apply(RunConfig& c) const {
        for (const auto& s : setters_) {
            s(c);
        }
    }

private:
    std::vector<std::function<void(RunConfig&)>> setters_;
};

void add_run_flags(CLI::App* app, FlagSet& flags) {
    flags.add<std::string>(app, "--suite", "suite name or comma-separated list", [](RunConfig& c, const std::string& v) { c.suite = v; });
    flags.add<int>(app, "--n-train", "training demonstrations", [](RunConfig& c, int v) { c.n_train = v; });
    flags.add<int>(app, "--n-eval", "evaluation tasks", [](RunConfig& c, int v) { c.n_eval = v; });
    flags.add<std::uint64_t>(app, "--seed", "master seed (falls back to SKIPKIT_SEED)", [](RunConfig& c, std::uint64_t v) { c.seed = v; });
    flags.add<double>(app, "--noise", "transit noise std (m)", [](RunConfig& c, double v) { c.noise = v; });
    flags.add<double>(app, "--jitter", "evaluation task jitter (m)", [](RunConfig& c, double v) { c.jitter = v; });
    flags.add<int>(app, "--window,-W", "DCT window W (even)", [](RunConfig& c, int v) { c.msk.window = v; });
    flags.add<double>(app, "--q,--quantile", "frequency quantile q", [](RunConfig& c, double v) { c.msk.quantile = v; });
    flags.add<int>(app, "--min-seg-len", "drop key runs shorter than this", [](RunConfig& c, int v) { c.msk.min_seg_len = v; });
    flags.add<double>(app, "--bend-cutoff", "bend score cutoff", [](RunConfig& c, double v) { c.msk.bend_cutoff = v; });
    flags.add<int>(app, "--bend-expand", "bend mask dilation (steps)", [](RunConfig& c, int v) { c.msk.bend_expand = v; });
    flags.add<int>(app, "--kf-neighborhood", "keyframe neighborhood (steps)", [](RunConfig& c, int v) { c.msk.kf_neighborhood = v; });
    flags.add<double>(app, "--head-exclude-frac", "unlabeled episode head fraction", [](RunConfig& c, double v) { c.msk.head_exclude_frac = v; });
    flags.add<bool>(app, "--use-bend", "include the bend detector", [](RunConfig& c, bool v) { c.msk.use_bend = v; });
    flags.add<bool>(app, "--use-keyframes", "include heuristic keyframes", [](RunConfig& c, bool v) { c.msk.use_keyframes = v; });
    flags.add<std::string>(app, "--labeler", "msk, rs, vo, lv or dense",
                           [](RunConfig& c, const std::string& v) { c.labeler = labeler_from_string(v); });
    flags.add<std::string>(app, "--H,--horizon", "chunk length or 'auto'",
                           [](RunConfig& c, const std::string& v) { c.horizon = parse_horizon(v); });
    flags.add<int>(app, "--k", "neighbors consulted per query", [](RunConfig& c, int v) { c.k = v; });
    flags.add<int>(app, "--budget", "step budget (0 = 3 x longest demo)", [](RunConfig& c, int v) { c.budget = v; });
    flags.add<double>(app, "--key-ratio", "random-segment key ratio", [](RunConfig& c, double v) { c.key_ratio = v; });
    flags.add<int>(app, "--seg-len", "random-segment length", [](RunConfig& c, int v) { c.seg_len = v; });
    flags.add<std::string>(app, "--compare", "also run the 'dense' arm", [](RunConfig& c, const std::string& v) { c.compare = v; });
    flags.add<std::string>(app, "--out,--output-dir", "artifact directory",
                           [](RunConfig& c, const std::string& v) { c.output_dir = v; });
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) { return config_json(cfg).dump(2); }

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"skipkit: key-segment relabeling pipeline on synthetic demonstrations"};
    app.require_subcommand(1);

    const std::vector<std::string> names{"gen", "segment", "relabel", "eval", "sweep"};
    const std::vector<std::string> help{"generate training demos and evaluation tasks",
                                        "label key segments of the training set",
                                        "build relabeled training chunks",
                                        "roll out the retrieval policy on the evaluation tasks",
                                        "ablation table over one axis"};
    std::vector<CLI::App*> subs;
    std::vector<FlagSet> flags(names.size());
    std::vector<std::string> config_paths(names.size());
    std::vector<bool> profile_flags(names.size(), false);
    std::string axis;
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto* sub = app.add_subcommand(names[i], help[i]);
        sub->add_option("--config", config_paths[i], "JSON config file; flags override its values");
        add_run_flags(sub, flags[i]);
        subs.push_back(sub);
    }
    subs[1]->add_flag("--profiles", "also write per-episode r_t/b_t CSV profiles");
    subs[4]->add_option("--axis", axis, "q, W, components or labeler")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        std::size_t which = 0;
        while (!subs[which]->parsed()) {
            ++which;
        }
        RunConfig cfg;
        if (const char* env = std::getenv("SKIPKIT_SEED"); env != nullptr && *env != '\0') {
            try {
                cfg.seed = std::stoull(env);
            } catch (const std::exception&) {
                throw UsageError(std::string("SKIPKIT_SEED is not an unsigned integer: '") + env + "'");
            }
        }
        if (!config_paths[which].empty()) {
            const auto lines = read_lines(config_paths[which]);
            std::string text;
            for (const auto& l : lines) {
                text += l;
                text += '\n';
            }
            json j;
            try {
                j = json::parse(text);
            } catch (const json::exception& e) {
                throw UsageError("config file " + config_paths[which] + ": " + e.what());
            }
            try {
                apply_json(cfg, j);
            } catch (const json::exception& e) {
                throw UsageError("config file " + config_paths[which] + ": " + e.what());
            }
        }
        flags[which].apply(cfg);
        if (which == 1 && subs[1]->count("--profiles") > 0) {
            cfg.profiles = true;
        }
        check_config(cfg);

        switch (which) {
            case 0: return cmd_gen(cfg, out);
            case 1: return cmd_segment(cfg, out);
            case 2: return cmd_relabel(cfg, out);
            case 3: return cmd_eval(cfg, out);
            default: return cmd_sweep(cfg, axis, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace skipkit
