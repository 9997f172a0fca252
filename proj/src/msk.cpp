#include "skipkit/msk.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "json_util.hpp"
#include "skipkit/dataset_io.hpp"

namespace skipkit {

namespace {

// Guards ceil() against products like 0.7 * 100 = 70.00000000000001.
constexpr double kCeilSlack = 1e-9;

// Orthonormal DCT-II basis, basis(k, n) = alpha_k cos(pi (2n+1) k / 2W).
Matrix dct_basis(int window) {
    const auto W = static_cast<std::size_t>(window);
    Matrix basis(W, W);
    const double a0 = std::sqrt(1.0 / static_cast<double>(W));
    const double ak = std::sqrt(2.0 / static_cast<double>(W));
    for (std::size_t k = 0; k < W; ++k) {
        for (std::size_t n = 0; n < W; ++n) {
            const double arg = std::numbers::pi * static_cast<double>((2 * n + 1) * k) / (2.0 * static_cast<double>(W));
            basis(k, n) = (k == 0 ? a0 : ak) * std::cos(arg);
        }
    }
    return basis;
}

// 0-based row index of window slot n for 1-based center t, clamped to the episode.
std::size_t window_row(int t, int n, int window, int length) {
    const int step = std::clamp(t - window / 2 + n, 1, length);
    return static_cast<std::size_t>(step - 1);
}

Matrix transform_window(const Matrix& basis, const Matrix& rows, int t, int window) {
    const auto W = static_cast<std::size_t>(window);
    const int length = static_cast<int>(rows.rows());
    Matrix coeffs(W, rows.cols());
    for (std::size_t n = 0; n < W; ++n) {
        const auto src = rows.row(window_row(t, static_cast<int>(n), window, length));
        for (std::size_t k = 0; k < W; ++k) {
            const double c = basis(k, n);
            auto dst = coeffs.row(k);
            for (std::size_t j = 0; j < src.size(); ++j) {
                dst[j] += c * src[j];
            }
        }
    }
    return coeffs;
}

double point_segment_distance(std::span<const double> p, std::span<const double> a, std::span<const double> b) {
    double dd = 0.0;
    double proj = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        const double d = b[j] - a[j];
        dd += d * d;
        proj += (p[j] - a[j]) * d;
    }
    const double s = dd > 0.0 ? std::clamp(proj / dd, 0.0, 1.0) : 0.0;
    double dist2 = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        const double r = p[j] - (a[j] + s * (b[j] - a[j]));
        dist2 += r * r;
    }
    return std::sqrt(dist2);
}

double distance3(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return std::sqrt(s);
}

void mark(std::vector<std::uint8_t>& mask, int center, int radius) {
    const int T = static_cast<int>(mask.size());
    const int lo = std::max(1, center - radius);
    const int hi = std::min(T, center + radius);
    for (int t = lo; t <= hi; ++t) {
        mask[static_cast<std::size_t>(t - 1)] = 1;
    }
}

std::vector<double> labelable_values(std::span<const double> values, int head) {
    return {values.begin() + std::min<std::ptrdiff_t>(head, static_cast<std::ptrdiff_t>(values.size())),
            values.end()};
}

}  // namespace

void MskConfig::validate() const {
    if (window < 4 || window % 2 != 0) {
        throw std::invalid_argument("window must be an even integer >= 4");
    }
    if (!(quantile > 0.0 && quantile < 1.0)) {
        throw std::invalid_argument("quantile must lie in (0, 1)");
    }
    if (min_seg_len < 1) {
        throw std::invalid_argument("min_seg_len must be >= 1");
    }
    if (!(bend_cutoff >= 0.0) || bend_expand < 0 || kf_neighborhood < 0) {
        throw std::invalid_argument("bend_cutoff, bend_expand and kf_neighborhood must be non-negative");
    }
    if (!(head_exclude_frac >= 0.0 && head_exclude_frac < 1.0)) {
        throw std::invalid_argument("head_exclude_frac must lie in [0, 1)");
    }
}

Matrix st_dct(const Matrix& vel, int t, int window) {
    if (window < 2 || window % 2 != 0) {
        throw std::invalid_argument("st_dct: window must be even");
    }
    if (t < 1 || t > static_cast<int>(vel.rows())) {
        throw std::out_of_range("st_dct: step outside episode");
    }
    return transform_window(dct_basis(window), vel, t, window);
}

double nearest_rank_quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw std::invalid_argument("nearest_rank_quantile: empty input");
    }
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - kCeilSlack));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
    return values[rank - 1];
}

constexpr double kRoundoffRatio = 1e-14;

std::vector<double> hf_energy_ratio(const Matrix& vel, const MskConfig& cfg) {
    const int W = cfg.window;
    const int T = static_cast<int>(vel.rows());
    const auto basis = dct_basis(W);
    const int high_from = (W + 1) / 2;
    std::vector<double> ratio(static_cast<std::size_t>(T), 0.0);
    for (int t = 1; t <= T; ++t) {
        const auto coeffs = transform_window(basis, vel, t, W);
        double low = 0.0;
        double high = 0.0;
        for (int k = 0; k < W; ++k) {
            double e = 0.0;
            for (double c : coeffs.row(static_cast<std::size_t>(k))) {
                e += c * c;
            }
            (k >= high_from ? high : low) += e;
        }
        const double total = low + high;
        const double r = total > 0.0 ? high / total : 0.0;
        // Below this the high band is basis round-off, not motion; keeping it
        // would let the strict quantile cut order exactly smooth steps.
        ratio[static_cast<std::size_t>(t - 1)] = r > kRoundoffRatio ? r : 0.0;
    }
    return ratio;
}

std::vector<double> bend_score(const Trajectory& traj, const MskConfig& cfg) {
    const int W = cfg.window;
    const int T = traj.length();
    const auto& p = traj.ee_pos;
    std::vector<double> bend(static_cast<std::size_t>(T), 0.0);
    for (int t = 1; t <= T; ++t) {
        const auto first = p.row(window_row(t, 0, W, T));
        const auto last = p.row(window_row(t, W - 1, W, T));
        double path = 0.0;
        double deviation = 0.0;
        for (int n = 0; n < W; ++n) {
            const auto pn = p.row(window_row(t, n, W, T));
            deviation += point_segment_distance(pn, first, last);
            if (n + 1 < W) {
                path += distance3(pn, p.row(window_row(t, n + 1, W, T)));
            }
        }
        const double mean_step = path / static_cast<double>(W - 1);
        if (mean_step > 0.0) {
            bend[static_cast<std::size_t>(t - 1)] = deviation / static_cast<double>(W) / mean_step;
        }
    }
    return bend;
}

SpectralProfile spectral_profile(const Trajectory& traj, const MskConfig& cfg) {
    return {hf_energy_ratio(velocities(traj), cfg), bend_score(traj, cfg)};
}

std::vector<int> heuristic_keyframes(const Trajectory& traj, const MskConfig& /*cfg*/) {
    const int T = traj.length();
    const auto speed = row_norms(velocities(traj));
    const double mean_speed = std::accumulate(speed.begin(), speed.end(), 0.0) / static_cast<double>(T);
    const double eps = kZeroCrossingRelThreshold * mean_speed;

    std::vector<int> frames;
    for (int t = 2; t <= T; ++t) {
        const auto i = static_cast<std::size_t>(t - 1);
        const bool toggled = traj.gripper[i] != traj.gripper[i - 1];
        const bool stopped = speed[i] <= eps && speed[i - 1] > eps;
        if (toggled || stopped) {
            frames.push_back(t);
        }
    }
    return frames;
}

std::vector<std::uint8_t> frequency_mask(std::span<const double> hf_ratio, double quantile,
                                         double head_exclude_frac) {
    const int T = static_cast<int>(hf_ratio.size());
    const int head = head_steps(T, head_exclude_frac);
    std::vector<std::uint8_t> mask(hf_ratio.size(), 0);
    if (head >= T) {
        return mask;
    }
    const double threshold = nearest_rank_quantile(labelable_values(hf_ratio, head), quantile);
    for (int t = head + 1; t <= T; ++t) {
        mask[static_cast<std::size_t>(t - 1)] = hf_ratio[static_cast<std::size_t>(t - 1)] > threshold ? 1 : 0;
    }
    return mask;
}

std::vector<std::uint8_t> drop_short_runs(std::vector<std::uint8_t> mask, int min_len) {
    for (const auto& run : runs_of(mask)) {
        if (run.length() < min_len) {
            std::fill(mask.begin() + run.start - 1, mask.begin() + run.end, std::uint8_t{0});
        }
    }
    return mask;
}

SegmentSet msk_label(const Trajectory& traj, const MskConfig& cfg) {
    cfg.validate();
    const int T = traj.length();
    if (T < cfg.window) {
        throw EpisodeTooShort("episode '" + traj.id + "' too short for window (T=" + std::to_string(T) +
                              ", W=" + std::to_string(cfg.window) + ")");
    }

    auto mask = frequency_mask(hf_energy_ratio(velocities(traj), cfg), cfg.quantile, cfg.head_exclude_frac);

    if (cfg.use_bend) {
        const auto bend = bend_score(traj, cfg);
        for (int t = 1; t <= T; ++t) {
            if (bend[static_cast<std::size_t>(t - 1)] > cfg.bend_cutoff) {
                mark(mask, t, cfg.bend_expand);
            }
        }
    }
    if (cfg.use_keyframes) {
        for (int kf : heuristic_keyframes(traj, cfg)) {
            mark(mask, kf, cfg.kf_neighborhood);
        }
    }

    const int head = head_steps(T, cfg.head_exclude_frac);
    std::fill(mask.begin(), mask.begin() + head, std::uint8_t{0});
    return SegmentSet::from_mask(traj.id, drop_short_runs(std::move(mask), cfg.min_seg_len));
}

SegmentSet rs_label(const Trajectory& traj, double key_ratio, int seg_len, double head_exclude_frac) {
    if (!(key_ratio > 0.0 && key_ratio < 1.0) || seg_len < 1) {
        throw std::invalid_argument("rs_label: need 0 < key_ratio < 1 and seg_len >= 1");
    }
    const int T = traj.length();
    const int head = head_steps(T, head_exclude_frac);
    const int labelable = T - head;
    const int period = static_cast<int>(std::ceil(static_cast<double>(seg_len) / key_ratio - kCeilSlack));
    // The final segment is shortened so the realized ratio tracks the request.
    const int budget = static_cast<int>(std::lround(key_ratio * static_cast<double>(labelable)));

    std::vector<Segment> segs;
    int placed = 0;
    for (int start = head + 1; start <= T && placed < budget; start += period) {
        const int len = std::min({seg_len, budget - placed, T - start + 1});
        segs.push_back({start, start + len - 1});
        placed += len;
    }
    return SegmentSet::from_segments(traj.id, T, std::move(segs));
}

std::vector<std::uint8_t> vo_raw_mask(const Trajectory& traj, double q, double head_exclude_frac) {
    const auto speed = row_norms(velocities(traj));
    const int T = traj.length();
    const int head = head_steps(T, head_exclude_frac);
    std::vector<std::uint8_t> mask(speed.size(), 0);
    if (head >= T) {
        return mask;
    }
    const double threshold = nearest_rank_quantile(labelable_values(speed, head), q);
    for (int t = head + 1; t <= T; ++t) {
        mask[static_cast<std::size_t>(t - 1)] = speed[static_cast<std::size_t>(t - 1)] > threshold ? 1 : 0;
    }
    return mask;
}

std::vector<std::uint8_t> lv_raw_mask(const Trajectory& traj, double q, double head_exclude_frac) {
    const auto speed = row_norms(velocities(traj));
    const int T = traj.length();
    const int head = head_steps(T, head_exclude_frac);
    std::vector<std::uint8_t> mask(speed.size(), 0);
    if (head >= T) {
        return mask;
    }
    const double threshold = nearest_rank_quantile(labelable_values(speed, head), 1.0 - q);
    for (int t = head + 1; t <= T; ++t) {
        mask[static_cast<std::size_t>(t - 1)] = speed[static_cast<std::size_t>(t - 1)] < threshold ? 1 : 0;
    }
    return mask;
}

SegmentSet vo_label(const Trajectory& traj, double q, const MskConfig& cfg) {
    return SegmentSet::from_mask(traj.id,
                                 drop_short_runs(vo_raw_mask(traj, q, cfg.head_exclude_frac), cfg.min_seg_len));
}

SegmentSet lv_label(const Trajectory& traj, double q, const MskConfig& cfg) {
    return SegmentSet::from_mask(traj.id,
                                 drop_short_runs(lv_raw_mask(traj, q, cfg.head_exclude_frac), cfg.min_seg_len));
}

std::string to_string(Labeler l) {
    switch (l) {
        case Labeler::msk: return "msk";
        case Labeler::rs: return "rs";
        case Labeler::vo: return "vo";
        case Labeler::lv: return "lv";
        case Labeler::dense: return "dense";
    }
    return "unknown";
}

Labeler labeler_from_string(const std::string& name) {
    for (auto l : {Labeler::msk, Labeler::rs, Labeler::vo, Labeler::lv, Labeler::dense}) {
        if (to_string(l) == name) {
            return l;
        }
    }
    throw std::invalid_argument("unknown labeler '" + name + "'");
}

std::vector<SegmentSet> label_dataset(const std::vector<Trajectory>& trajs, const LabelerSpec& spec) {
    std::vector<SegmentSet> out;
    out.reserve(trajs.size());
    for (const auto& traj : trajs) {
        switch (spec.kind) {
            case Labeler::msk: out.push_back(msk_label(traj, spec.msk)); break;
            case Labeler::rs:
                out.push_back(rs_label(traj, spec.rs_key_ratio, spec.rs_seg_len, spec.msk.head_exclude_frac));
                break;
            case Labeler::vo: out.push_back(vo_label(traj, spec.msk.quantile, spec.msk)); break;
            case Labeler::lv: out.push_back(lv_label(traj, spec.msk.quantile, spec.msk)); break;
            case Labeler::dense: out.push_back(SegmentSet::from_segments(traj.id, traj.length(), {})); break;
        }
    }
    return out;
}

void save_segments(const std::vector<SegmentSet>& segs, Labeler source, double head_exclude_frac,
                   const std::filesystem::path& path) {
    std::string out;
    for (const auto& s : segs) {
        nlohmann::json j;
        j["id"] = s.episode_id();
        j["segments"] = detail::segments_to_json(s.segments());
        j["key_ratio"] = key_ratio(s, head_exclude_frac);
        j["source"] = to_string(source);
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<SegmentSet> load_segments(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
    std::unordered_map<std::string, int> lengths;
    for (const auto& t : trajs) {
        lengths[t.id] = t.length();
    }
    const auto lines = read_lines(path);
    std::vector<SegmentSet> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        std::string id;
        std::vector<Segment> segs;
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            id = j.at("id").get<std::string>();
            segs = detail::segments_from_json(j.at("segments"));
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
        const auto it = lengths.find(id);
        if (it == lengths.end()) {
            throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": unknown episode id '" + id + "'");
        }
        out.push_back(SegmentSet::from_segments(id, it->second, std::move(segs)));
    }
    return out;
}

std::string profile_csv(const SpectralProfile& profile, const SegmentSet& segs) {
    std::ostringstream os;
    os.precision(17);
    os << "t,r_t,b_t,y_t\n";
    for (std::size_t i = 0; i < profile.hf_ratio.size(); ++i) {
        os << (i + 1) << ',' << profile.hf_ratio[i] << ',' << profile.bend[i] << ','
           << static_cast<int>(segs.mask()[i]) << '\n';
    }
    return os.str();
}

}  // namespace skipkit
