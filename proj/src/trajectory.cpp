#include "skipkit/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace skipkit {

namespace {

[[noreturn]] void fail(const Trajectory& traj, const std::string& what) {
    throw InvariantError("episode '" + traj.id + "': " + what + " violated");
}

bool all_finite(const Matrix& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void validate(const Trajectory& traj) {
    const auto T = traj.actions.rows();
    if (T < 2) {
        fail(traj, "T ≥ 2");
    }
    if (traj.actions.cols() < 3) {
        fail(traj, "d ≥ 3");
    }
    if (traj.ee_pos.rows() != T || traj.gripper.size() != T || traj.observations.rows() != T) {
        fail(traj, "equal length T across actions/ee_pos/gripper/observations");
    }
    if (traj.ee_pos.cols() != 3) {
        fail(traj, "ee_pos has 3 columns");
    }
    if (!all_finite(traj.actions) || !all_finite(traj.ee_pos) || !all_finite(traj.observations)) {
        fail(traj, "all rows finite");
    }
}

Matrix velocities(const Trajectory& traj) {
    const auto& a = traj.actions;
    Matrix v(a.rows(), a.cols());
    for (std::size_t t = 1; t < a.rows(); ++t) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            v(t, j) = a(t, j) - a(t - 1, j);
        }
    }
    return v;
}

std::vector<double> row_norms(const Matrix& m) {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (double x : m.row(r)) {
            s += x * x;
        }
        out[r] = std::sqrt(s);
    }
    return out;
}

std::vector<Segment> runs_of(std::span<const std::uint8_t> mask) {
    std::vector<Segment> runs;
    const int T = static_cast<int>(mask.size());
    int t = 0;
    while (t < T) {
        if (mask[static_cast<std::size_t>(t)] == 0) {
            ++t;
            continue;
        }
        const int begin = t;
        while (t < T && mask[static_cast<std::size_t>(t)] != 0) {
            ++t;
        }
        runs.push_back({begin + 1, t});
    }
    return runs;
}

SegmentSet SegmentSet::from_segments(std::string episode_id, int length, std::vector<Segment> segments) {
    if (length < 0) {
        throw InvariantError("segment set '" + episode_id + "': negative length");
    }
    SegmentSet s;
    s.mask_.assign(static_cast<std::size_t>(length), 0);
    int prev_end = 0;
    for (const auto& seg : segments) {
        if (seg.start < 1 || seg.start > seg.end || seg.end > length) {
            throw InvariantError("segment set '" + episode_id + "': 1 ≤ s ≤ e ≤ T violated for [" +
                                 std::to_string(seg.start) + "," + std::to_string(seg.end) + "]");
        }
        if (seg.start <= prev_end) {
            throw InvariantError("segment set '" + episode_id + "': segments must be ordered and disjoint");
        }
        std::fill(s.mask_.begin() + seg.start - 1, s.mask_.begin() + seg.end, std::uint8_t{1});
        prev_end = seg.end;
    }
    s.episode_id_ = std::move(episode_id);
    s.segments_ = std::move(segments);
    return s;
}

SegmentSet SegmentSet::from_mask(std::string episode_id, std::vector<std::uint8_t> mask) {
    for (auto& m : mask) {
        m = m != 0 ? 1 : 0;
    }
    SegmentSet s;
    s.segments_ = runs_of(mask);
    s.mask_ = std::move(mask);
    s.episode_id_ = std::move(episode_id);
    return s;
}

int SegmentSet::key_steps() const noexcept {
    return static_cast<int>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

int SegmentSet::longest_segment() const noexcept {
    int best = 0;
    for (const auto& s : segments_) {
        best = std::max(best, s.length());
    }
    return best;
}

int head_steps(int length, double head_exclude_frac) {
    return static_cast<int>(std::floor(head_exclude_frac * static_cast<double>(length)));
}

double key_ratio(const SegmentSet& segs, double head_exclude_frac) {
    const int labelable = segs.length() - head_steps(segs.length(), head_exclude_frac);
    if (labelable <= 0) {
        return 0.0;
    }
    return static_cast<double>(segs.key_steps()) / static_cast<double>(labelable);
}

double mask_iou(const SegmentSet& a, const SegmentSet& b) {
    if (a.length() != b.length()) {
        throw std::invalid_argument("mask_iou: length mismatch");
    }
    int inter = 0;
    int uni = 0;
    for (std::size_t i = 0; i < a.mask().size(); ++i) {
        inter += (a.mask()[i] & b.mask()[i]);
        uni += (a.mask()[i] | b.mask()[i]);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace skipkit
