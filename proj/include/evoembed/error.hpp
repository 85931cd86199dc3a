#ifndef EVOEMBED_ERROR_HPP
#define EVOEMBED_ERROR_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace evoembed {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (CLI exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed files or inconsistent shapes (CLI exit code 2).
class FormatError : public Error {
public:
    using Error::Error;
};

/// A dataset failed invariant checks (CLI exit code 2).
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::vector<std::string> violations)
        : Error(what), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// Non-finite values or failed numerical procedures (CLI exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

/// A high-dimensional distance row that cannot be turned into probabilities.
class DegenerateRowError : public NumericError {
public:
    using NumericError::NumericError;
};

} // namespace evoembed

#endif
