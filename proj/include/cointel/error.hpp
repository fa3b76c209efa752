#pragma once

#include <stdexcept>
#include <string>

namespace cointel {

/// Base of every error thrown by the toolkit. `exit_code()` is the process
/// status the CLI maps the error to.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Rejected input: precondition violated, malformed config, bad parameters.
class InvalidInput : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// A numerical computation failed (degenerate formula, non-finite value,
/// simulation fault, divergence).
class NumericalFault : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Filesystem or stream failure.
class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidInput(what);
}

} // namespace detail

} // namespace cointel
