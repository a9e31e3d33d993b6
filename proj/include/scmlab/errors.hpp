#pragma once

#include <stdexcept>
#include <string>

namespace scm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid covariance or order-parameter input to a moment kernel.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inconsistent configuration: shape mismatch, bad flag value, unrealizable target.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Text input that does not parse. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Raised when an eigen-solver or linear solve fails to converge.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Iterative search (fixed point, bisection bracket) that did not succeed.
class SearchError : public Error {
public:
    using Error::Error;
};

class BracketError : public SearchError {
public:
    using SearchError::SearchError;
};

/// Finite-difference stencil could not be kept inside the kernel domain.
class BoundaryError : public Error {
public:
    using Error::Error;
};

}  // namespace scm
