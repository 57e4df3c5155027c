#pragma once

#include <stdexcept>
#include <string>

namespace corona {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dimension / shape mismatch between operands.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// SVD failure (non-finite input or backend non-convergence).
struct SvdError : Error {
    explicit SvdError(const std::string& msg) : Error(msg) {}
};

/// Iterative routine exceeded its iteration cap or produced non-finite values.
struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& msg) : Error(msg) {}
};

/// File format / persistence failure.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Invalid configuration value.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace corona
