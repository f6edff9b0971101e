#pragma once

#include <span>

namespace echolab {

struct GaussianFit {
    double amplitude = 0.0;
    double center = 0.0;
    double sigma = 0.0;  ///< r.m.s. width, same units as x
};

/// Least-squares fit of a * exp(-(x - c)^2 / (2 s^2)) to the contiguous run of points
/// around the maximum whose values exceed `floor_fraction` of the peak.
///
/// Levenberg-Marquardt seeded from the second moment of the selected points. Throws
/// FitError (carrying the second-moment width) if the fit does not converge.
GaussianFit fit_gaussian(std::span<const double> x, std::span<const double> y, double floor_fraction = 0.05);

/// sqrt of the second central moment of y over x (y treated as weights).
double second_moment_width(std::span<const double> x, std::span<const double> y);

}  // namespace echolab
