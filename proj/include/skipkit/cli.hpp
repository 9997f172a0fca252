#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "skipkit/msk.hpp"

namespace skipkit {

// Every knob of the pipeline commands. JSON keys use the field names;
// command-line flags use the same names in kebab-case.
struct RunConfig {
    std::string suite = "grasp-place";  // comma-separated list allowed
    int n_train = 100;
    int n_eval = 100;
    std::uint64_t seed = 0;
    double noise = 0.001;
    double jitter = 0.005;
    MskConfig msk;
    Labeler labeler = Labeler::msk;
    std::optional<int> horizon;  // nullopt = auto
    int k = 1;
    int budget = 0;              // 0 = 3 x longest training demo
    double key_ratio = 0.25;     // rs only
    int seg_len = 10;            // rs only
    std::string compare;         // "dense" or empty
    bool profiles = false;
    std::filesystem::path output_dir = "skipkit_out";
};

std::string config_to_json(const RunConfig& cfg);

// Runs one subcommand (gen, segment, relabel, eval, sweep). Returns the exit
// code: 0 success, 1 runtime failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace skipkit
