#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "skipkit/rng.hpp"
#include "skipkit/trajectory.hpp"

namespace skipkit::testing {

// Episode whose actions and ee positions are the given 3-d points.
inline Trajectory path_episode(const std::string& id, const std::vector<std::array<double, 3>>& points,
                               std::vector<Gripper> gripper = {}) {
    Trajectory t;
    t.id = id;
    const auto T = points.size();
    t.actions = Matrix(T, 3);
    t.ee_pos = Matrix(T, 3);
    t.observations = Matrix(T, 4);
    if (gripper.empty()) {
        gripper.assign(T, Gripper::open);
    }
    t.gripper = gripper;
    for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            t.actions(i, j) = points[i][j];
            t.ee_pos(i, j) = points[i][j];
            t.observations(i, j) = points[i][j];
        }
        t.observations(i, 3) = gripper[i] == Gripper::closed ? 1.0 : 0.0;
    }
    return t;
}

// Random episode with T steps, d action dims and a d_o-dim observation.
inline Trajectory random_episode(Rng& rng, const std::string& id, int T, int d = 3, int d_o = 5) {
    Trajectory t;
    t.id = id;
    t.actions = Matrix(static_cast<std::size_t>(T), static_cast<std::size_t>(d));
    t.ee_pos = Matrix(static_cast<std::size_t>(T), 3);
    t.observations = Matrix(static_cast<std::size_t>(T), static_cast<std::size_t>(d_o));
    for (std::size_t i = 0; i < static_cast<std::size_t>(T); ++i) {
        for (std::size_t j = 0; j < t.actions.cols(); ++j) {
            t.actions(i, j) = rng.uniform(-1.0, 1.0);
        }
        for (std::size_t j = 0; j < 3; ++j) {
            t.ee_pos(i, j) = rng.uniform(0.0, 1.0);
        }
        for (std::size_t j = 0; j < t.observations.cols(); ++j) {
            t.observations(i, j) = rng.normal();
        }
        t.gripper.push_back(rng.uniform() < 0.5 ? Gripper::open : Gripper::closed);
    }
    return t;
}

// Random ordered, disjoint segments over T steps.
inline SegmentSet random_segments(Rng& rng, const std::string& id, int T) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(T), 0);
    const double density = rng.uniform(0.0, 0.6);
    for (auto& m : mask) {
        m = rng.uniform() < density ? 1 : 0;
    }
    return SegmentSet::from_mask(id, mask);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("skipkit_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace skipkit::testing
