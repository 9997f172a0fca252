#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skipkit/matrix.hpp"
#include "skipkit/trajectory.hpp"

namespace skipkit {

// Motion Spectrum Keying: key segments from short-time DCT high-frequency
// energy, a scale-invariant bend score, and heuristic keyframes.
struct MskConfig {
    int window = 16;               // W, even, >= 4
    double quantile = 0.75;        // q in (0, 1)
    int min_seg_len = 3;           // L_min
    double bend_cutoff = 0.30;
    int bend_expand = 2;
    int kf_neighborhood = 5;
    double head_exclude_frac = 0.20;
    bool use_bend = true;
    bool use_keyframes = true;

    // Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

// Fraction of the episode mean speed below which a step counts as stopped
// when detecting velocity zero-crossings.
inline constexpr double kZeroCrossingRelThreshold = 0.05;

struct SpectralProfile {
    std::vector<double> hf_ratio;  // r_t in [0, 1]
    std::vector<double> bend;      // b_t >= 0
};

class EpisodeTooShort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Orthonormal DCT-II over the centered window [t - W/2, t + W/2 - 1] of the
// velocity sequence, replicating edge rows where the window overhangs the
// episode. t is 1-based. Returns a W x d coefficient matrix.
Matrix st_dct(const Matrix& vel, int t, int window);

// Nearest-rank quantile: the ceil(q*N)-th smallest value (N >= 1).
double nearest_rank_quantile(std::vector<double> values, double q);

std::vector<double> hf_energy_ratio(const Matrix& vel, const MskConfig& cfg);
std::vector<double> bend_score(const Trajectory& traj, const MskConfig& cfg);
SpectralProfile spectral_profile(const Trajectory& traj, const MskConfig& cfg);

// Gripper toggles and velocity zero-crossings, 1-based, sorted, unique.
std::vector<int> heuristic_keyframes(const Trajectory& traj, const MskConfig& cfg);

// Raw (pre-grouping) frequency mask: r_t strictly above the per-episode
// q-quantile taken over the non-head steps. Head steps are always 0.
std::vector<std::uint8_t> frequency_mask(std::span<const double> hf_ratio, double quantile,
                                         double head_exclude_frac);

SegmentSet msk_label(const Trajectory& traj, const MskConfig& cfg);

// Alternative label sources used in the label-source ablation.
SegmentSet rs_label(const Trajectory& traj, double key_ratio, int seg_len,
                    double head_exclude_frac = MskConfig{}.head_exclude_frac);
std::vector<std::uint8_t> vo_raw_mask(const Trajectory& traj, double q,
                                      double head_exclude_frac = MskConfig{}.head_exclude_frac);
std::vector<std::uint8_t> lv_raw_mask(const Trajectory& traj, double q,
                                      double head_exclude_frac = MskConfig{}.head_exclude_frac);
SegmentSet vo_label(const Trajectory& traj, double q, const MskConfig& cfg = {});
SegmentSet lv_label(const Trajectory& traj, double q, const MskConfig& cfg = {});

// Drops runs shorter than min_len from a 0/1 mask (adjacent runs are already
// merged by construction of the mask).
std::vector<std::uint8_t> drop_short_runs(std::vector<std::uint8_t> mask, int min_len);

enum class Labeler { msk, rs, vo, lv, dense };

std::string to_string(Labeler l);
Labeler labeler_from_string(const std::string& name);

// Parameters of every label source in one place.
struct LabelerSpec {
    Labeler kind = Labeler::msk;
    MskConfig msk;
    double rs_key_ratio = 0.25;
    int rs_seg_len = 10;
};

// Per-episode segmentation with the chosen source. Labeler::dense yields empty
// segment sets (the dense arm ignores segments).
std::vector<SegmentSet> label_dataset(const std::vector<Trajectory>& trajs, const LabelerSpec& spec);

// Segmentation file, JSON Lines:
//   {"id": str, "segments": [[s,e],...], "key_ratio": f, "source": "msk"|"rs"|"vo"|"lv"}
// Episode lengths are not part of the record, so loading needs the dataset.
void save_segments(const std::vector<SegmentSet>& segs, Labeler source, double head_exclude_frac,
                   const std::filesystem::path& path);
std::vector<SegmentSet> load_segments(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);

// Per-step CSV "t,r_t,b_t,y_t" for plotting.
std::string profile_csv(const SpectralProfile& profile, const SegmentSet& segs);

}  // namespace skipkit
