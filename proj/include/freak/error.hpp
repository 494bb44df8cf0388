#pragma once

#include <stdexcept>
#include <string>

namespace freak {

// Precondition or shape-contract breach on an API call.
struct ContractViolation : std::invalid_argument {
    explicit ContractViolation(const std::string& msg)
        : std::invalid_argument("contract violation: " + msg) {}
};

// Bad model/training configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg)
        : std::runtime_error("config error: " + msg) {}
};

// Malformed on-disk data (bad magic, truncation, inconsistent indices).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg)
        : std::runtime_error("format error: " + msg) {}
};

// Filesystem-level failure.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg)
        : std::runtime_error("io error: " + msg) {}
};

// Irrecoverable failure inside the optimizer loop (e.g. non-finite loss).
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg)
        : std::runtime_error("training error: " + msg) {}
};

}  // namespace freak
