#include "skipkit/relabel.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "json_util.hpp"
#include "skipkit/dataset_io.hpp"

namespace skipkit {

std::string to_string(SampleMode m) {
    switch (m) {
        case SampleMode::refine: return "refine";
        case SampleMode::skip: return "skip";
        case SampleMode::skip_tail: return "skip_tail";
    }
    return "unknown";
}

SampleMode sample_mode_from_string(const std::string& name) {
    for (auto m : {SampleMode::refine, SampleMode::skip, SampleMode::skip_tail}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw std::invalid_argument("unknown sample mode '" + name + "'");
}

std::optional<int> next_key_start(const SegmentSet& segs, int t) {
    for (const auto& s : segs.segments()) {
        if (s.start > t) {
            return s.start;
        }
    }
    return std::nullopt;
}

RelabeledSample chunk_at(const Trajectory& traj, int t, SampleMode mode, int start, int horizon) {
    if (horizon < 1) {
        throw std::invalid_argument("chunk horizon must be >= 1");
    }
    const int T = traj.length();
    const std::size_t d = traj.actions.cols();
    RelabeledSample s;
    s.episode_id = traj.id;
    s.t = t;
    s.mode = mode;
    s.target_start = start;
    s.chunk = Matrix(static_cast<std::size_t>(horizon), d);
    s.mask.assign(static_cast<std::size_t>(horizon), 0);
    for (int h = 0; h < horizon && start + h <= T; ++h) {
        const auto src = traj.actions.row(static_cast<std::size_t>(start + h - 1));
        std::copy(src.begin(), src.end(), s.chunk.row(static_cast<std::size_t>(h)).begin());
        s.mask[static_cast<std::size_t>(h)] = 1;
    }
    return s;
}

RelabeledSample build_sample(const Trajectory& traj, const SegmentSet& segs, int t, int horizon) {
    if (t < 1 || t > traj.length()) {
        throw std::out_of_range("build_sample: step " + std::to_string(t) + " outside episode '" + traj.id + "'");
    }
    if (segs.length() != traj.length()) {
        throw std::invalid_argument("build_sample: segment set length differs from episode '" + traj.id + "'");
    }
    if (segs.is_key(t)) {
        return chunk_at(traj, t, SampleMode::refine, t + 1, horizon);
    }
    if (const auto next = next_key_start(segs, t)) {
        return chunk_at(traj, t, SampleMode::skip, *next, horizon);
    }
    return chunk_at(traj, t, SampleMode::skip_tail, t + 1, horizon);
}

int auto_horizon(const std::vector<SegmentSet>& segsets) {
    int h = 1;
    for (const auto& s : segsets) {
        h = std::max(h, s.longest_segment());
    }
    return h;
}

std::vector<RelabeledSample> relabel_dataset(const std::vector<Trajectory>& trajs,
                                             const std::vector<SegmentSet>& segsets, std::optional<int> horizon) {
    std::unordered_map<std::string, const SegmentSet*> by_id;
    for (const auto& s : segsets) {
        by_id[s.episode_id()] = &s;
    }
    const int H = horizon.value_or(auto_horizon(segsets));
    std::vector<RelabeledSample> out;
    for (const auto& traj : trajs) {
        const auto it = by_id.find(traj.id);
        if (it == by_id.end()) {
            throw std::invalid_argument("relabel_dataset: no segment set for episode '" + traj.id + "'");
        }
        for (int t = 1; t < traj.length(); ++t) {
            out.push_back(build_sample(traj, *it->second, t, H));
        }
    }
    return out;
}

std::vector<RelabeledSample> dense_relabel_dataset(const std::vector<Trajectory>& trajs, int horizon) {
    std::vector<RelabeledSample> out;
    for (const auto& traj : trajs) {
        for (int t = 1; t < traj.length(); ++t) {
            out.push_back(chunk_at(traj, t, SampleMode::refine, t + 1, horizon));
        }
    }
    return out;
}

double masked_chunk_loss(const Matrix& pred, const RelabeledSample& sample) {
    if (pred.rows() != sample.chunk.rows() || pred.cols() != sample.chunk.cols()) {
        throw std::invalid_argument("masked_chunk_loss: prediction shape differs from chunk");
    }
    double sum = 0.0;
    int active = 0;
    for (std::size_t h = 0; h < pred.rows(); ++h) {
        if (sample.mask[h] == 0) {
            continue;
        }
        ++active;
        for (std::size_t j = 0; j < pred.cols(); ++j) {
            const double diff = pred(h, j) - sample.chunk(h, j);
            sum += diff * diff;
        }
    }
    return active == 0 ? 0.0 : sum / active;
}

void save_samples(const std::vector<RelabeledSample>& samples, const std::filesystem::path& path) {
    std::string out;
    for (const auto& s : samples) {
        nlohmann::json j;
        j["id"] = s.episode_id;
        j["t"] = s.t;
        j["mode"] = to_string(s.mode);
        j["target_start"] = s.target_start;
        j["chunk"] = detail::matrix_to_json(s.chunk);
        j["mask"] = s.mask;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<RelabeledSample> load_samples(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    std::vector<RelabeledSample> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            RelabeledSample s;
            s.episode_id = j.at("id").get<std::string>();
            s.t = j.at("t").get<int>();
            s.mode = sample_mode_from_string(j.at("mode").get<std::string>());
            s.target_start = j.at("target_start").get<int>();
            s.chunk = detail::matrix_from_json(j.at("chunk"));
            s.mask = j.at("mask").get<std::vector<std::uint8_t>>();
            if (s.mask.size() != s.chunk.rows()) {
                throw std::invalid_argument("mask length differs from chunk rows");
            }
            out.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace skipkit
