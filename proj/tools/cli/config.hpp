#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "leelab/kinematics.hpp"

namespace leelab::cli {

struct TimeGridConfig {
    double t_max = 0.0; // 0: auto, min(20 / golden-rule rate, recurrence guard)
    int samples = 400;
};

struct BoostConfig {
    bool use_refined = false;
    std::vector<double> beta_sweep = {0.1, 0.2, 0.3, 0.4, 0.5,
                                      0.6, 0.7, 0.8, 0.9, 1.0};
};

struct FitConfig {
    double abs2_lo = 0.05;
    double abs2_hi = 0.9;
    double min_r_squared = 0.999;
};

struct RunConfig {
    ModelParams model;
    int n_modes = 41;
    double dk = 0.25;
    double packet_width = 0.0; // 0: default 4 * dk, applied at load time
    std::vector<double> velocities = {0.2, 0.5, 0.8};
    std::vector<double> momenta = {0.5, 1.0};
    TimeGridConfig t_grid;
    BoostConfig boost;
    FitConfig fit;
    std::string output_dir = "out";
};

// Parse and validate a config object. Unknown keys are rejected by name at
// every nesting level; absent optional keys take defaults (echoed back by
// config_echo); the packet width defaults to 4 * dk. Throws ConfigError.
RunConfig config_from_json(const nlohmann::json& j);

// Reads the file, parses JSON, and applies config_from_json.
// Throws ConfigError if the file cannot be read or parsed.
RunConfig load_config(const std::string& path);

// The fully resolved configuration, defaults included, as written into
// reports: feeding this back through config_from_json reproduces the run.
nlohmann::json config_echo(const RunConfig& config);

} // namespace leelab::cli
