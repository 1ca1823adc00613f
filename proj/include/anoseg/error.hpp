#pragma once

#include <stdexcept>
#include <string>

namespace anoseg {

/// Invalid user-supplied configuration or arguments (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File system, decode, or parse failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor/image dimensions that do not fit an operation's contract.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure at run time (non-finite loss or gradient).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace anoseg
