#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pfeller {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression text. `position` is a 0-based byte offset.
class ParseError : public Error {
public:
    ParseError(std::size_t position, std::vector<std::string> expected, const std::string& found);

    std::size_t position() const noexcept { return position_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::vector<std::string> expected_;
};

/// A structural invariant of a warping function failed at sample `t`.
class ValidationError : public Error {
public:
    ValidationError(std::string invariant, double t, const std::string& detail);

    const std::string& invariant() const noexcept { return invariant_; }
    double at() const noexcept { return t_; }

private:
    std::string invariant_;
    double t_;
};

class EvalError : public Error {
public:
    using Error::Error;
};

/// Newton or descent iteration failed; carries the per-iteration residual trace.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, std::vector<std::string> trace);

    const std::vector<std::string>& trace() const noexcept { return trace_; }

private:
    std::vector<std::string> trace_;
};

/// A log-scale evaluation lost more precision than the caller tolerates,
/// e.g. a ratio of two quantities whose logarithms exceed ~1e9.
class PrecisionLimit : public EvalError {
public:
    using EvalError::EvalError;
};

class InvalidBoundary : public Error {
public:
    using Error::Error;
};

class GridMismatch : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace pfeller
