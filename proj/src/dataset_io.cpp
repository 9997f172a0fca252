#include "skipkit/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "json_util.hpp"

namespace skipkit {

using nlohmann::json;

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        lines.push_back(std::move(line));
    }
    return lines;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open '" + path.string() + "' for writing");
        }
        out << content;
        if (!out.flush()) {
            throw IoError("write to '" + path.string() + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move temporary file onto '" + path.string() + "'");
    }
}

std::string trajectory_to_json_line(const Trajectory& traj) {
    json j;
    j["id"] = traj.id;
    j["actions"] = detail::matrix_to_json(traj.actions);
    j["ee_pos"] = detail::matrix_to_json(traj.ee_pos);
    auto g = json::array();
    for (auto s : traj.gripper) {
        g.push_back(static_cast<int>(s));
    }
    j["gripper"] = std::move(g);
    j["observations"] = detail::matrix_to_json(traj.observations);
    return j.dump();
}

Trajectory trajectory_from_json_line(const std::string& line) {
    const json j = json::parse(line);
    Trajectory traj;
    traj.id = j.at("id").get<std::string>();
    traj.actions = detail::matrix_from_json(j.at("actions"));
    traj.ee_pos = detail::matrix_from_json(j.at("ee_pos"));
    for (const auto& g : j.at("gripper")) {
        const int v = g.get<int>();
        if (v != 0 && v != 1) {
            throw std::invalid_argument("gripper values must be 0 or 1");
        }
        traj.gripper.push_back(static_cast<Gripper>(v));
    }
    traj.observations = detail::matrix_from_json(j.at("observations"));
    return traj;
}

std::vector<Trajectory> load_dataset(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    std::vector<Trajectory> trajs;
    trajs.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        Trajectory traj;
        try {
            traj = trajectory_from_json_line(lines[i]);
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
        validate(traj);
        trajs.push_back(std::move(traj));
    }
    return trajs;
}

void save_dataset(const std::vector<Trajectory>& trajs, const std::filesystem::path& path) {
    std::string out;
    for (const auto& t : trajs) {
        validate(t);
        out += trajectory_to_json_line(t);
        out += '\n';
    }
    write_file_atomic(path, out);
}

}  // namespace skipkit
