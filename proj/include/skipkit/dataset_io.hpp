#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "skipkit/trajectory.hpp"

namespace skipkit {

// Malformed input file; the message names the offending line.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when an output file cannot be written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// JSON Lines, one episode per line:
//   {"id": str, "actions": [[f,...],...], "ee_pos": [[f,f,f],...],
//    "gripper": [0|1,...], "observations": [[f,...],...]}
// Numbers are written in shortest round-trip decimal form, so a save/load
// cycle reproduces every double bit for bit.
std::vector<Trajectory> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<Trajectory>& trajs, const std::filesystem::path& path);

std::string trajectory_to_json_line(const Trajectory& traj);
Trajectory trajectory_from_json_line(const std::string& line);

// Shared JSONL plumbing.
std::vector<std::string> read_lines(const std::filesystem::path& path);
// Writes via a temporary sibling and renames, so readers never observe a
// partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace skipkit
