#pragma once

#include <stdexcept>
#include <string>

namespace omnivl {

// Shape/axis violations (e.g. H not divisible by patch size).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad argument values (out-of-range id, batch mismatch, ...).
struct ArgError : std::invalid_argument {
    explicit ArgError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid configuration (unknown key, missing stage, empty vocab).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files (manifest lines, payload headers).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values in a forward pass or loss.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace omnivl
