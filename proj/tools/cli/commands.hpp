#pragma once

#include <string>
#include <vector>

namespace leelab::cli {

// Full CLI entry point: parses argv (argv[0] is the program name),
// dispatches one subcommand, writes its report. Returns the process exit
// code: 0 success, 1 numeric/fit/assertion/io failure, 2 usage or config
// error. Never throws.
int run_command(int argc, const char* const* argv);

// Convenience overload for tests: args exclude the program name.
int run_command(const std::vector<std::string>& args);

} // namespace leelab::cli
