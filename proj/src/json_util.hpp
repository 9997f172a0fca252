#pragma once

// Private JSON helpers shared by the module serializers.

#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "skipkit/matrix.hpp"
#include "skipkit/trajectory.hpp"

namespace skipkit::detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    auto rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (double x : m.row(r)) {
            row.push_back(x);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array()) {
        throw std::invalid_argument("expected an array of rows");
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(j.size());
    for (const auto& row : j) {
        if (!row.is_array()) {
            throw std::invalid_argument("expected a row array");
        }
        std::vector<double> values;
        values.reserve(row.size());
        for (const auto& x : row) {
            if (!x.is_number()) {
                throw std::invalid_argument("non-numeric matrix entry");
            }
            values.push_back(x.get<double>());
        }
        rows.push_back(std::move(values));
    }
    return Matrix::from_rows(rows);
}

inline nlohmann::json segments_to_json(const std::vector<Segment>& segs) {
    auto arr = nlohmann::json::array();
    for (const auto& s : segs) {
        arr.push_back({s.start, s.end});
    }
    return arr;
}

inline std::vector<Segment> segments_from_json(const nlohmann::json& j) {
    std::vector<Segment> segs;
    for (const auto& s : j) {
        if (!s.is_array() || s.size() != 2) {
            throw std::invalid_argument("segment must be [s, e]");
        }
        segs.push_back({s[0].get<int>(), s[1].get<int>()});
    }
    return segs;
}

}  // namespace skipkit::detail
