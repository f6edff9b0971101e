#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "echolab/grid.hpp"
#include "echolab/skew_normal.hpp"

namespace echolab {

enum class Interpolation { linear, monotone_cubic };
enum class Extension { hold, linear_extend };

std::string_view to_string(Interpolation m);
std::string_view to_string(Extension e);
Interpolation interpolation_from_string(std::string_view s);
Extension extension_from_string(std::string_view s);

/// Piecewise frequency trajectory w(t) (kHz) through nodes at strictly increasing times (ms).
///
/// Before the first node the first frequency is held. Past the last node the policy is
/// either hold or continuation with the end slope.
class Trajectory {
public:
    Trajectory(std::vector<double> times_ms, std::vector<double> freqs_khz, Interpolation method,
               Extension extension = Extension::hold);

    double operator()(double t_ms) const;
    /// Integral of w from the first node time to t (kHz * ms = cycles).
    double integral(double t_ms) const;

    const std::vector<double>& times() const { return t_; }
    const std::vector<double>& freqs() const { return f_; }
    /// Node derivatives (kHz/ms) of the interpolant.
    const std::vector<double>& slopes() const { return d_; }
    Interpolation method() const { return method_; }
    Extension extension() const { return extension_; }

private:
    std::size_t segment(double t) const;
    double segment_integral(std::size_t k, double t) const;

    std::vector<double> t_, f_, d_;
    std::vector<double> cumulative_;  ///< integral up to each node
    Interpolation method_;
    Extension extension_;
};

/// Shape-preserving piecewise-cubic node slopes: weighted harmonic mean in the interior
/// (zero at local extrema), one-sided three-point estimate at the ends.
std::vector<double> monotone_slopes(const std::vector<double>& t, const std::vector<double>& f);

/// Trajectory through the node frequencies of `triple` at `node_times_ms`.
Trajectory interpolate(const FrequencyTriple& triple, Interpolation method, Extension extension = Extension::hold,
                       const std::array<double, 3>& node_times_ms = {0.0, 2.0, 5.0});

struct WindowSpec {
    double center_khz = 6.5;
    double width_khz = 0.5;  ///< full width
    int node = 0;            ///< 0, 1, 2 for w0, w2, w5

    double lo() const { return center_khz - 0.5 * width_khz; }
    double hi() const { return center_khz + 0.5 * width_khz; }
    bool contains(double w) const { return w >= lo() && w <= hi(); }
    void validate() const;

    bool operator==(const WindowSpec&) const = default;
};

/// P_f(w5) = integral over the w0 and w2 windows of the trivariate density, on `grid`.
/// Throws ConvergenceError if the window cubature does not settle.
Spectrum1D windowed_final_probability(const SkewNormalParams& params, const WindowSpec& w0_window,
                                      const WindowSpec& w2_window, const GridSpec& grid = kModelGrid);

struct TrajectorySample {
    FrequencyTriple nodes;
    Trajectory trajectory;
    double weight = 0.0;   ///< 1/n: draws already follow the density
    double density = 0.0;  ///< trivariate density at the nodes
};

/// Rejection-samples node triples inside both windows and interpolates them. Throws
/// ValidationError when the acceptance rate falls below 1e-4.
std::vector<TrajectorySample> sample_trajectories(const SkewNormalParams& params, const WindowSpec& w0_window,
                                                  const WindowSpec& w2_window, std::size_t n, std::uint64_t seed,
                                                  Interpolation method, Extension extension = Extension::hold);

/// CSV rows time_ms,freq_khz,trajectory_id,weight on a uniform time grid.
void write_trajectories_csv(std::ostream& os, const std::vector<TrajectorySample>& samples, double t_max_ms = 6.0,
                            double step_ms = 0.05);

}  // namespace echolab
