#include "report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "leelab/errors.hpp"

namespace leelab::cli {

namespace {

using nlohmann::json;

std::string format_double(double value) {
    if (std::isnan(value)) {
        return "null"; // JSON has no NaN; absent measurements use null
    }
    if (std::isinf(value)) {
        return value > 0 ? "1e999" : "-1e999"; // parses back to +-infinity
    }
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

void escape_string(const std::string& s, std::string& out) {
    out += '"';
    for (const char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buffer[8];
                std::snprintf(buffer, sizeof(buffer), "\\u%04x", c);
                out += buffer;
            } else {
                out += c; // UTF-8 bytes pass through
            }
        }
    }
    out += '"';
}

void dump_value(const json& j, int indent, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
    const std::string pad_in(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        std::size_t i = 0;
        for (const auto& item : j.items()) { // std::map order: keys sorted
            out += pad_in;
            escape_string(item.key(), out);
            out += ": ";
            dump_value(item.value(), indent, depth + 1, out);
            if (++i < j.size()) {
                out += ',';
            }
            out += '\n';
        }
        out += pad + "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            out += pad_in;
            dump_value(j[i], indent, depth + 1, out);
            if (i + 1 < j.size()) {
                out += ',';
            }
            out += '\n';
        }
        out += pad + "]";
        return;
    }
    case json::value_t::string:
        escape_string(j.get<std::string>(), out);
        return;
    case json::value_t::boolean:
        out += j.get<bool>() ? "true" : "false";
        return;
    case json::value_t::number_integer:
        out += std::to_string(j.get<long long>());
        return;
    case json::value_t::number_unsigned:
        out += std::to_string(j.get<unsigned long long>());
        return;
    case json::value_t::number_float:
        out += format_double(j.get<double>());
        return;
    default:
        out += "null";
        return;
    }
}

} // namespace

std::string dump_deterministic(const json& j, int indent) {
    std::string out;
    dump_value(j, indent, 0, out);
    out += '\n';
    return out;
}

std::string series_csv(const AmplitudeSeries& series) {
    std::string out = "t,re,im,abs2\n";
    for (std::size_t i = 0; i < series.t.size(); ++i) {
        const cplx value = series.values[i];
        out += format_double(series.t[i]);
        out += ',';
        out += format_double(value.real());
        out += ',';
        out += format_double(value.imag());
        out += ',';
        out += format_double(std::norm(value));
        out += '\n';
    }
    return out;
}

json fit_to_json(const DecayFit& fit) {
    return json{{"m_eff", fit.m_eff},
                {"gamma_rate", fit.gamma_rate},
                {"t1", fit.t1},
                {"t2", fit.t2},
                {"r_squared", fit.r_squared},
                {"recurrence_guard", fit.recurrence_guard}};
}

json series_summary_json(const AmplitudeSeries& series) {
    double max_abs = 0.0;
    for (const cplx& value : series.values) {
        max_abs = std::max(max_abs, std::abs(value));
    }
    return json{{"label", series.label},
                {"samples", series.t.size()},
                {"t_max", series.t.empty() ? 0.0 : series.t.back()},
                {"max_abs", max_abs},
                {"final_abs2", series.values.empty()
                                   ? 0.0
                                   : std::norm(series.values.back())}};
}

ReportBuilder::ReportBuilder(json config_echo) {
    root_["config_echo"] = std::move(config_echo);
    root_["versions"] = {{"artifact", kArtifactVersion},
                         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                       std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                       std::to_string(EIGEN_MINOR_VERSION)}};
    root_["results"] = json::object();
    root_["timing"] = json::object();
}

void ReportBuilder::add_series(const AmplitudeSeries& series) {
    series_.push_back(series);
}

void ReportBuilder::add_extra_file(const std::string& name, std::string content) {
    extra_files_.emplace_back(name, std::move(content));
}

void ReportBuilder::add_timing(const std::string& stage, double seconds) {
    root_["timing"][stage] = seconds;
}

void ReportBuilder::write(const std::string& out_dir) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory \"" + out_dir +
                      "\": " + ec.message());
    }
    const auto write_file = [&](const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw IoError("cannot open \"" + path.string() + "\" for writing");
        }
        out << text;
        if (!out) {
            throw IoError("write failed for \"" + path.string() + "\"");
        }
    };
    write_file(fs::path(out_dir) / "report.json", dump_deterministic(root_));
    for (const AmplitudeSeries& series : series_) {
        write_file(fs::path(out_dir) / (series.label + ".csv"), series_csv(series));
    }
    for (const auto& [name, content] : extra_files_) {
        write_file(fs::path(out_dir) / name, content);
    }
}

StageTimer::StageTimer() : last_(0.0) {
    last_ = std::chrono::duration<double>(
                std::chrono::steady_clock::now().time_since_epoch())
                .count();
}

double StageTimer::lap_seconds() {
    const double now = std::chrono::duration<double>(
                           std::chrono::steady_clock::now().time_since_epoch())
                           .count();
    const double lap = now - last_;
    last_ = now;
    return lap;
}

} // namespace leelab::cli
