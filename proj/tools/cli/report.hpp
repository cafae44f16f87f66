#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "leelab/evolution.hpp"

namespace leelab::cli {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Serializes a JSON tree deterministically: object keys sorted (the
// default nlohmann object is already ordered), floats printed with 17
// significant digits so parsing them back is lossless, arrays in order.
std::string dump_deterministic(const nlohmann::json& j, int indent = 2);

// One amplitude series as CSV text: header "t,re,im,abs2", one row per
// sample, 17-significant-digit floats, "\n" newlines.
std::string series_csv(const AmplitudeSeries& series);

// JSON fragments for report building.
nlohmann::json fit_to_json(const DecayFit& fit);
nlohmann::json series_summary_json(const AmplitudeSeries& series);

// Collects per-experiment results plus the amplitude series to be written
// next to the report. write() emits report.json and one <label>.csv per
// collected series into out_dir (created if absent).
class ReportBuilder {
public:
    explicit ReportBuilder(nlohmann::json config_echo);

    nlohmann::json& results() { return root_["results"]; }
    nlohmann::json& root() { return root_; }

    void add_series(const AmplitudeSeries& series);
    // Additional named text outputs (fit summary tables and the like).
    void add_extra_file(const std::string& name, std::string content);
    void add_timing(const std::string& stage, double seconds);

    // Throws IoError when out_dir cannot be created or written.
    void write(const std::string& out_dir) const;

    const std::vector<AmplitudeSeries>& series() const { return series_; }

private:
    nlohmann::json root_;
    std::vector<AmplitudeSeries> series_;
    std::vector<std::pair<std::string, std::string>> extra_files_;
};

// Wall-clock stage timer feeding ReportBuilder::add_timing.
class StageTimer {
public:
    StageTimer();
    double lap_seconds(); // seconds since construction or the previous lap
private:
    double last_;
};

} // namespace leelab::cli
