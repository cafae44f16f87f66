#pragma once

#include <string>

namespace leelab {

// Stage-tagged progress logging on stderr: "[stage] message".
// Silenced globally by set_log_quiet(true).
void set_log_quiet(bool quiet);
bool log_quiet();
void log_stage(const std::string& stage, const std::string& message);

} // namespace leelab
