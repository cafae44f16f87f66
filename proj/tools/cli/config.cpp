#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "leelab/errors.hpp"

namespace leelab::cli {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::string& scope,
                         const std::set<std::string>& known) {
    for (const auto& item : j.items()) {
        if (known.count(item.key()) == 0) {
            throw ConfigError("config: unknown key \"" +
                              (scope.empty() ? item.key() : scope + "." + item.key()) +
                              "\"");
        }
    }
}

const json& expect_object(const json& j, const std::string& key) {
    if (!j.is_object()) {
        throw ConfigError("config: key \"" + key + "\" must be an object");
    }
    return j;
}

double read_number(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_number()) {
        throw ConfigError("config: key \"" + key + "\" must be a number");
    }
    return j.at(key).get<double>();
}

int read_int(const json& j, const std::string& key, int fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_number_integer()) {
        throw ConfigError("config: key \"" + key + "\" must be an integer");
    }
    return j.at(key).get<int>();
}

bool read_flag(const json& j, const std::string& key, bool fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_boolean()) {
        throw ConfigError("config: key \"" + key + "\" must be a boolean");
    }
    return j.at(key).get<bool>();
}

std::vector<double> read_number_list(const json& j, const std::string& key,
                                     std::vector<double> fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    const json& value = j.at(key);
    if (!value.is_array()) {
        throw ConfigError("config: key \"" + key + "\" must be an array of numbers");
    }
    std::vector<double> out;
    out.reserve(value.size());
    for (const json& entry : value) {
        if (!entry.is_number()) {
            throw ConfigError("config: key \"" + key +
                              "\" must be an array of numbers");
        }
        out.push_back(entry.get<double>());
    }
    return out;
}

std::string read_string(const json& j, const std::string& key, std::string fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_string()) {
        throw ConfigError("config: key \"" + key + "\" must be a string");
    }
    return j.at(key).get<std::string>();
}

} // namespace

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) {
        throw ConfigError("config: top level must be a JSON object");
    }
    reject_unknown_keys(j, "", {"model", "grid", "packet_width", "velocities",
                                "momenta", "t_grid", "boost", "fit", "output_dir"});
    RunConfig config;

    if (j.contains("model")) {
        const json& m = expect_object(j.at("model"), "model");
        reject_unknown_keys(m, "model", {"m_a", "m_b", "m_c", "g", "lambda_ff"});
        config.model.m_a = read_number(m, "m_a", config.model.m_a);
        config.model.m_b = read_number(m, "m_b", config.model.m_b);
        config.model.m_c = read_number(m, "m_c", config.model.m_c);
        config.model.g = read_number(m, "g", config.model.g);
        config.model.lambda_ff = read_number(m, "lambda_ff", config.model.lambda_ff);
    }
    if (j.contains("grid")) {
        const json& g = expect_object(j.at("grid"), "grid");
        reject_unknown_keys(g, "grid", {"n_modes", "dk"});
        config.n_modes = read_int(g, "n_modes", config.n_modes);
        config.dk = read_number(g, "dk", config.dk);
    }
    config.packet_width = read_number(j, "packet_width", 0.0);
    config.velocities = read_number_list(j, "velocities", config.velocities);
    config.momenta = read_number_list(j, "momenta", config.momenta);
    if (j.contains("t_grid")) {
        const json& t = expect_object(j.at("t_grid"), "t_grid");
        reject_unknown_keys(t, "t_grid", {"t_max", "samples"});
        config.t_grid.t_max = read_number(t, "t_max", config.t_grid.t_max);
        config.t_grid.samples = read_int(t, "samples", config.t_grid.samples);
    }
    if (j.contains("boost")) {
        const json& b = expect_object(j.at("boost"), "boost");
        reject_unknown_keys(b, "boost", {"use_refined", "beta_sweep"});
        config.boost.use_refined = read_flag(b, "use_refined", config.boost.use_refined);
        config.boost.beta_sweep =
            read_number_list(b, "beta_sweep", config.boost.beta_sweep);
    }
    if (j.contains("fit")) {
        const json& f = expect_object(j.at("fit"), "fit");
        reject_unknown_keys(f, "fit", {"abs2_lo", "abs2_hi", "min_r_squared"});
        config.fit.abs2_lo = read_number(f, "abs2_lo", config.fit.abs2_lo);
        config.fit.abs2_hi = read_number(f, "abs2_hi", config.fit.abs2_hi);
        config.fit.min_r_squared =
            read_number(f, "min_r_squared", config.fit.min_r_squared);
    }
    config.output_dir = read_string(j, "output_dir", config.output_dir);

    config.model.validate();
    (void)MomentumGrid::build(config.n_modes, config.dk); // validates grid shape
    if (config.packet_width == 0.0) {
        config.packet_width = 4.0 * config.dk;
    }
    if (!(config.packet_width > 0.0)) {
        throw ConfigError("config: packet_width must be positive");
    }
    for (const double v : config.velocities) {
        if (!(std::abs(v) < 1.0)) {
            throw ConfigError("config: velocities must satisfy |v| < 1, got " +
                              std::to_string(v));
        }
    }
    if (config.t_grid.t_max < 0.0) {
        throw ConfigError("config: t_grid.t_max must be positive (or omitted for auto)");
    }
    if (config.t_grid.samples < 2) {
        throw ConfigError("config: t_grid.samples must be at least 2");
    }
    for (const double beta : config.boost.beta_sweep) {
        if (!std::isfinite(beta)) {
            throw ConfigError("config: boost.beta_sweep entries must be finite");
        }
    }
    if (!(config.fit.abs2_lo >= 0.0) || !(config.fit.abs2_hi > config.fit.abs2_lo)) {
        throw ConfigError("config: fit thresholds need 0 <= abs2_lo < abs2_hi");
    }
    if (!(config.fit.min_r_squared >= 0.0 && config.fit.min_r_squared <= 1.0)) {
        throw ConfigError("config: fit.min_r_squared must lie in [0, 1]");
    }
    if (config.output_dir.empty()) {
        throw ConfigError("config: output_dir must not be empty");
    }
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file \"" + path + "\"");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

nlohmann::json config_echo(const RunConfig& config) {
    json j;
    j["model"] = {{"m_a", config.model.m_a},
                  {"m_b", config.model.m_b},
                  {"m_c", config.model.m_c},
                  {"g", config.model.g},
                  {"lambda_ff", config.model.lambda_ff}};
    j["grid"] = {{"n_modes", config.n_modes}, {"dk", config.dk}};
    j["packet_width"] = config.packet_width;
    j["velocities"] = config.velocities;
    j["momenta"] = config.momenta;
    j["t_grid"] = {{"t_max", config.t_grid.t_max}, {"samples", config.t_grid.samples}};
    j["boost"] = {{"use_refined", config.boost.use_refined},
                  {"beta_sweep", config.boost.beta_sweep}};
    j["fit"] = {{"abs2_lo", config.fit.abs2_lo},
                {"abs2_hi", config.fit.abs2_hi},
                {"min_r_squared", config.fit.min_r_squared}};
    j["output_dir"] = config.output_dir;
    return j;
}

} // namespace leelab::cli
