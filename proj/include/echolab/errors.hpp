#pragma once

#include <stdexcept>
#include <string>

namespace echolab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or inputs (non-PD covariance, bad grid, bad config).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure did not reach its tolerance. Carries the last estimate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double estimate)
        : Error(what), estimate_(estimate) {}
    double estimate() const noexcept { return estimate_; }

private:
    double estimate_;
};

/// A frequency grid does not capture enough of a spectrum's mass.
class CoverageError : public ValidationError {
public:
    CoverageError(const std::string& what, double captured)
        : ValidationError(what), captured_(captured) {}
    double captured() const noexcept { return captured_; }

private:
    double captured_;
};

/// Least-squares Gaussian fit failed; the raw second-moment width is attached.
class FitError : public Error {
public:
    FitError(const std::string& what, double fallback_width)
        : Error(what), fallback_width_(fallback_width) {}
    double fallback_width() const noexcept { return fallback_width_; }

private:
    double fallback_width_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace echolab
