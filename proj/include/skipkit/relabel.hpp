#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "skipkit/matrix.hpp"
#include "skipkit/trajectory.hpp"

namespace skipkit {

enum class SampleMode { refine, skip, skip_tail };

std::string to_string(SampleMode m);
SampleMode sample_mode_from_string(const std::string& name);

// One relabeled training target. chunk is H x d; rows past the episode end
// are zero and masked out.
struct RelabeledSample {
    std::string episode_id;
    int t = 0;
    SampleMode mode = SampleMode::refine;
    int target_start = 0;
    Matrix chunk;
    std::vector<std::uint8_t> mask;

    bool operator==(const RelabeledSample&) const = default;
};

// Start of the first key segment strictly after t, if any.
std::optional<int> next_key_start(const SegmentSet& segs, int t);

// Chunk a_{start}, ..., a_{start+H-1} with zero rows and mask 0 past T.
RelabeledSample chunk_at(const Trajectory& traj, int t, SampleMode mode, int start, int horizon);

// Inside a key segment the target is the next step; in a skip region it jumps
// to the next key-segment start, or to the next step when none is left.
RelabeledSample build_sample(const Trajectory& traj, const SegmentSet& segs, int t, int horizon);

// Dataset-level chunk length for "auto": longest key segment, at least 1.
int auto_horizon(const std::vector<SegmentSet>& segsets);

// One sample per (episode, t), t = 1..T-1, episodes in input order. Segment
// sets are matched by episode id; throws std::invalid_argument when one is
// missing. horizon = nullopt selects auto_horizon.
std::vector<RelabeledSample> relabel_dataset(const std::vector<Trajectory>& trajs,
                                             const std::vector<SegmentSet>& segsets, std::optional<int> horizon);

// Baseline: every step predicts the following actions (t* = t + 1).
std::vector<RelabeledSample> dense_relabel_dataset(const std::vector<Trajectory>& trajs, int horizon);

// Mean squared Euclidean row error over unmasked rows; 0 for an empty mask.
double masked_chunk_loss(const Matrix& pred, const RelabeledSample& sample);

// JSON Lines: {"id", "t", "mode", "target_start", "chunk", "mask"}.
void save_samples(const std::vector<RelabeledSample>& samples, const std::filesystem::path& path);
std::vector<RelabeledSample> load_samples(const std::filesystem::path& path);

}  // namespace skipkit
