#pragma once

#include <stdexcept>
#include <string>

namespace tdir {

// Errors are grouped by what the caller can do about them; the CLI maps
// each group to a distinct exit code.

/// Caller passed arguments outside an operation's declared domain.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File system or format problem (unreadable file, bad magic, truncation).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values detected in a numeric pipeline.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace tdir
