#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skipkit/matrix.hpp"

namespace skipkit {

// Raised when a value violates a documented data-model invariant.
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Gripper : std::uint8_t { open = 0, closed = 1 };

// One demonstration episode. Rows of every matrix are steps t = 1..T stored
// 0-based (row t-1). The first three action columns are the end-effector
// translation target in meters.
struct Trajectory {
    std::string id;
    Matrix actions;       // T x d, absolute control targets
    Matrix ee_pos;        // T x 3, end-effector translation
    std::vector<Gripper> gripper;
    Matrix observations;  // T x d_o

    [[nodiscard]] int length() const noexcept { return static_cast<int>(actions.rows()); }

    bool operator==(const Trajectory&) const = default;
};

// Throws InvariantError naming the episode and the violated invariant.
void validate(const Trajectory& traj);

// Per-step velocities v_t = a_t - a_{t-1}; v_1 is the zero vector.
Matrix velocities(const Trajectory& traj);

// Row-wise Euclidean norms.
std::vector<double> row_norms(const Matrix& m);

// Closed step interval [start, end], 1-based inclusive.
struct Segment {
    int start = 0;
    int end = 0;

    [[nodiscard]] int length() const noexcept { return end - start + 1; }
    bool operator==(const Segment&) const = default;
};

// Ordered, disjoint key segments of one episode together with the per-step
// binary mask y_t they induce. Both views are kept consistent by construction.
class SegmentSet {
public:
    SegmentSet() = default;

    static SegmentSet from_segments(std::string episode_id, int length, std::vector<Segment> segments);
    static SegmentSet from_mask(std::string episode_id, std::vector<std::uint8_t> mask);

    [[nodiscard]] const std::string& episode_id() const noexcept { return episode_id_; }
    [[nodiscard]] int length() const noexcept { return static_cast<int>(mask_.size()); }
    [[nodiscard]] const std::vector<Segment>& segments() const noexcept { return segments_; }
    [[nodiscard]] const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }

    // y_t for 1-based t.
    [[nodiscard]] bool is_key(int t) const { return mask_.at(static_cast<std::size_t>(t - 1)) != 0; }
    [[nodiscard]] int key_steps() const noexcept;
    [[nodiscard]] int longest_segment() const noexcept;

    bool operator==(const SegmentSet&) const = default;

private:
    std::string episode_id_;
    std::vector<Segment> segments_;
    std::vector<std::uint8_t> mask_;
};

// Maximal runs of ones in a 0/1 mask, 1-based inclusive.
std::vector<Segment> runs_of(std::span<const std::uint8_t> mask);

// Number of leading steps excluded from labeling: floor(frac * T).
int head_steps(int length, double head_exclude_frac);

// Key steps divided by the labelable (non-head) steps. The head is never
// labeled by any source, so this is the fraction a labeler actually controls.
double key_ratio(const SegmentSet& segs, double head_exclude_frac);

// |A ∩ B| / |A ∪ B| over the step masks; 1 when both are empty.
double mask_iou(const SegmentSet& a, const SegmentSet& b);

}  // namespace skipkit
