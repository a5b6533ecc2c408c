#pragma once

#include <stdexcept>
#include <string>

namespace linstab {

// Base for every error raised by the library. Hypothesis failures in the
// stability harnesses are reported as values, not thrown.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class SingularPoint : public Error {
public:
    using Error::Error;
};

class UnsupportedOrder : public Error {
public:
    using Error::Error;
};

class TooLarge : public Error {
public:
    using Error::Error;
};

class NumericFailure : public Error {
public:
    NumericFailure(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Raised when a coherent state cannot be represented on the grid.
class ResolutionError : public Error {
public:
    ResolutionError(const std::string& what, int min_points)
        : Error(what + "; need at least N=" + std::to_string(min_points)),
          min_points_(min_points) {}

    int min_points() const noexcept { return min_points_; }

private:
    int min_points_;
};

}  // namespace linstab
