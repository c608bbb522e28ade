#pragma once

#include <stdexcept>
#include <string>

namespace crossing {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration. `path` is a JSON pointer to the
/// offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A hypothesis of the corrected approximation does not hold for the inputs.
/// `assumption` is the 1-based index in the list: 1 increments, 2 uniform
/// integrability of the stopping times, 3 boundary regularity, 4 payoff
/// regularity, 5 value-function regularity.
class AssumptionViolation : public Error {
public:
    AssumptionViolation(int assumption, const std::string& what)
        : Error("assumption " + std::to_string(assumption) + " violated: " + what),
          assumption_(assumption) {}
    int assumption() const noexcept { return assumption_; }

private:
    int assumption_;
};

/// The computation refuses to return a number it cannot vouch for
/// (step cap hit, truncation tolerance exceeded, under-resolved grid).
class NumericalRefusal : public Error {
public:
    using Error::Error;
};

/// Evaluation outside the domain where a quantity is defined.
class DomainError : public Error {
public:
    using Error::Error;
};

}  // namespace crossing
