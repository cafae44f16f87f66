#pragma once

#include <stdexcept>

namespace leelab {

// Invalid or inconsistent user-facing configuration (bad grid size, closed
// decay channel, malformed config file). Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A numerical routine failed or produced something it must never produce
// (eigensolver failure, non-Hermitian input beyond tolerance).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A decay-rate fit could not find an admissible window or failed its
// quality gate.
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File output or input failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace leelab
