#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "echolab/skew_normal.hpp"
#include "echolab/trajectories.hpp"

namespace echolab {

/// Echo times 0, step, ..., t_max (ms).
std::vector<double> tau_grid(double t_max_ms = 6.0, double step_ms = 0.05);

/// Net refocused phase (rad) for an ideal phase reversal at t1 and readout at 2 t1.
double accumulated_phase(const Trajectory& traj, double t1_ms);

struct EchoOptions {
    Interpolation method = Interpolation::monotone_cubic;
    Extension extension = Extension::hold;
    /// Gauss-Legendre nodes per whitened axis.
    std::size_t nodes = 48;
    /// Half-width of the cube in whitened (Cholesky) coordinates.
    double half_width = 6.0;
    /// Re-evaluate with nodes + resolution_step and compare.
    bool check_convergence = true;
    std::size_t resolution_step = 8;
    /// Largest allowed change of epsilon at the next resolution.
    double tolerance = 0.01;
};

struct EchoCurve {
    std::vector<double> tau_ms;
    std::vector<double> epsilon;
    std::vector<bool> converged;        ///< per point
    std::vector<bool> model_dependent;  ///< tau beyond the last node time
    std::vector<double> std_error;      ///< Monte Carlo only
    Interpolation method = Interpolation::monotone_cubic;
    Extension extension = Extension::hold;
    std::string source = "quadrature";
    std::size_t nodes = 0;  ///< per axis for quadrature, draws for Monte Carlo
    double half_width = 0.0;
    double max_change = 0.0;  ///< largest |delta epsilon| at the next resolution

    bool all_converged() const;
};

/// |weighted mean of exp(-i phi)| over a tensor Gauss-Legendre grid in whitened coordinates,
/// normalized by the on-grid mass.
EchoCurve echo_amplitude(const SkewNormalParams& params, const std::vector<double>& tau_ms,
                         const EchoOptions& options = {});

/// Equal-weight echo over explicit trajectories, with the standard error of the modulus.
EchoCurve echo_from_trajectories(const std::vector<Trajectory>& trajectories, const std::vector<double>& tau_ms);

/// Monte Carlo echo from n skew-normal draws.
EchoCurve echo_monte_carlo(const SkewNormalParams& params, const std::vector<double>& tau_ms, std::size_t n,
                           std::uint64_t seed, Interpolation method = Interpolation::monotone_cubic,
                           Extension extension = Extension::hold);

struct FreeDephasing {
    std::vector<double> t_ms;
    std::vector<double> decay;
    std::optional<double> one_over_e_ms;  ///< empty when the decay never reaches 1/e
};

/// |integral of the node-0 marginal times exp(-2 pi i w t)| on the given times.
FreeDephasing free_dephasing(const SkewNormalParams& params, const std::vector<double>& t_ms);

struct PlateauOptions {
    /// Largest |d epsilon / d tau| inside a plateau, as a fraction of epsilon per ms.
    double slope_threshold = 0.05;
    double min_length_ms = 0.5;

    bool operator==(const PlateauOptions&) const = default;
};

struct PlateauReport {
    double initial_decay_ms = 0.0;
    double initial_end_ms = 0.0;  ///< end of the segment used for the initial fit
    /// Smallest local time constant -1 / (d ln eps / d tau) on that segment (diagnostic).
    double steepest_decay_ms = 0.0;
    bool detected = false;
    double start_ms = 0.0;  ///< longest flat run, reported even when too short
    double end_ms = 0.0;
    double level = 0.0;
    std::optional<double> final_decay_ms;

    double length_ms() const { return end_ms - start_ms; }
};

/// Two-stage decay analysis. Throws ValidationError when the curve spans < 2 ms or is
/// sampled coarser than 0.1 ms. A curve that never decays gets an infinite initial decay
/// constant and no plateau.
PlateauReport detect_plateau(const EchoCurve& curve, const PlateauOptions& options = {});
PlateauReport detect_plateau(const std::vector<double>& tau_ms, const std::vector<double>& epsilon,
                             const PlateauOptions& options = {});

struct SweepCell {
    double rho25 = 0.0;
    double rho05 = 0.0;
    bool feasible = false;  ///< covariance positive definite
    bool converged = false;
    PlateauReport report;
};

/// echo_amplitude + detect_plateau over a grid of (rho25, rho05); infeasible cells are
/// kept with feasible = false.
std::vector<SweepCell> correlation_sweep(const SkewNormalParams& params, const std::vector<double>& rho25_values,
                                         const std::vector<double>& rho05_values, const std::vector<double>& tau_ms,
                                         const EchoOptions& echo = {}, const PlateauOptions& plateau = {});

void write_echo_csv(std::ostream& os, const EchoCurve& curve);
void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells);

}  // namespace echolab
