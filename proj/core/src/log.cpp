#include "leelab/log.hpp"

#include <atomic>
#include <cstdio>

namespace leelab {

namespace {
std::atomic<bool> g_quiet{false};
}

void set_log_quiet(bool quiet) { g_quiet.store(quiet); }

bool log_quiet() { return g_quiet.load(); }

void log_stage(const std::string& stage, const std::string& message) {
    if (g_quiet.load()) return;
    std::fprintf(stderr, "[%s] %s\n", stage.c_str(), message.c_str());
}

} // namespace leelab
