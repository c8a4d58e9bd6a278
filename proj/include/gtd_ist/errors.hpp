#pragma once

#include <stdexcept>
#include <string>

namespace gtd_ist {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A linear system (Bellman, TD fixed point, Gram) could not be solved reliably.
class SingularSystem : public Error {
public:
    SingularSystem(const std::string& what, double condition)
        : Error(what + " (condition estimate " + std::to_string(condition) + ")"),
          condition_(condition) {}

    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

/// Raised when a learner's parameters leave the finite range.
class Divergence : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gtd_ist
