#ifndef ACMT_ERRORS_HPP
#define ACMT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace acmt {

// Invalid arguments / contract violations map to std::invalid_argument.
// The types below distinguish failures that callers handle differently.

struct CorruptDatasetError : std::runtime_error {
    explicit CorruptDatasetError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CorruptCheckpointError : std::runtime_error {
    explicit CorruptCheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateBatchError : std::runtime_error {
    explicit DegenerateBatchError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value surfaced during optimization or metric evaluation.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A metric was asked for on inputs where it has no defined value
// (e.g. overlap scores when both masks are empty).
struct UndefinedMetricError : std::runtime_error {
    explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or contradictory run configuration (bad JSON, unknown keys,
// out-of-range values); the CLI reports these as usage errors.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace acmt

#endif
