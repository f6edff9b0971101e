#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "echolab/echo.hpp"
#include "echolab/trajectories.hpp"

namespace echolab {

namespace constants {
/// Planck constant (J s), exact SI value.
inline constexpr double kPlanck = 6.62607015e-34;
/// Boltzmann constant (J/K), exact SI value.
inline constexpr double kBoltzmann = 1.380649e-23;
/// Atomic mass unit (kg), CODATA 2018.
inline constexpr double kAtomicMass = 1.66053906660e-27;
/// Rb-85 atomic mass (u).
inline constexpr double kRb85MassU = 84.911789738;
}  // namespace constants

enum class DepthModel { harmonic, numeric };

std::string_view to_string(DepthModel m);
DepthModel depth_model_from_string(std::string_view s);

struct LatticeConfig {
    double spacing_um = 0.930;
    double angle_deg = 49.0;
    double wavelength_nm = 780.0;
    double depth_er = 24.0;  ///< ensemble-mean depth at t = 0
    double tilt_er = 2.86;   ///< per site; recorded only
    /// 1/e^2 intensity radius of the transverse depth profile.
    double waist_um = 375.0;
    /// r.m.s. width of the initial cloud along each transverse axis.
    double cloud_sigma_um = 100.0;
    double temperature_uk = 10.0;
    DepthModel depth_model = DepthModel::numeric;

    /// E_R / h in Hz for Rb-85 at this spacing.
    double recoil_hz() const;
    /// Peak depth chosen so the initial ensemble mean equals depth_er.
    double peak_depth_er() const;
    /// Throws ValidationError unless every physical field is positive.
    void validate() const;

    bool operator==(const LatticeConfig&) const = default;
};

/// Transition frequency nu_01 (kHz) at depth s (E_R). Numeric mode diagonalizes the
/// sinusoidal lattice in a plane-wave basis; throws ConvergenceError if doubling the basis
/// moves the result by more than 1 Hz.
double depth_to_frequency(double s, DepthModel mode, double recoil_hz, std::size_t basis = 201);

struct BallisticOptions {
    double t_max_ms = 6.0;
    double step_ms = 0.05;  ///< node spacing of the stored trajectories
};

struct BallisticAtom {
    double x0_um, y0_um;     ///< initial position
    double vx_um_ms, vy_um_ms;  ///< velocity

    double radius_um(double t_ms) const;
};

struct BallisticEnsemble {
    std::vector<BallisticAtom> atoms;
    std::vector<Trajectory> trajectories;  ///< monotone-cubic through dense nodes, hold past t_max
};

/// Free-flight atoms through the Gaussian depth profile; deterministic by seed.
BallisticEnsemble ballistic_ensemble(const LatticeConfig& config, std::size_t n, std::uint64_t seed,
                                     const BallisticOptions& options = {});

struct BaselineEcho {
    EchoCurve curve;
    PlateauReport plateau;
    bool resolution_warning = false;  ///< max Monte Carlo standard error above 0.02
};

BaselineEcho baseline_echo(const LatticeConfig& config, std::size_t n, std::uint64_t seed,
                           const std::vector<double>& tau_ms, const PlateauOptions& plateau = {});
/// Same analysis on an existing ensemble.
BaselineEcho baseline_echo(const BallisticEnsemble& ensemble, const std::vector<double>& tau_ms,
                           const PlateauOptions& plateau = {});

struct TrajectoryCensus {
    std::size_t up_up = 0, up_down = 0, down_up = 0, down_down = 0, degenerate = 0;
    std::size_t total = 0;
    double increment_correlation = 0.0;  ///< corr(w2 - w0, w5 - w2); 0 when undefined

    double fraction(std::size_t count) const { return total ? static_cast<double>(count) / total : 0.0; }
};

/// Sign classes of (w(2) - w(0), w(5) - w(2)); increments below `tolerance_khz` in
/// magnitude count as degenerate.
TrajectoryCensus baseline_trajectory_census(const std::vector<Trajectory>& ensemble,
                                            const std::array<double, 3>& node_times_ms = {0.0, 2.0, 5.0},
                                            double tolerance_khz = 1e-9);

}  // namespace echolab
