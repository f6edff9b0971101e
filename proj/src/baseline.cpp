#include "echolab/baseline.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>
#include <optional>
#include <random>

#include <lapacke.h>

#include "echolab/errors.hpp"

namespace echolab {

std::string_view to_string(DepthModel m) { return m == DepthModel::harmonic ? "harmonic" : "numeric"; }

DepthModel depth_model_from_string(std::string_view s) {
    if (s == "harmonic") return DepthModel::harmonic;
    if (s == "numeric") return DepthModel::numeric;
    throw ValidationError("unknown depth model: " + std::string(s));
}

double LatticeConfig::recoil_hz() const {
    const double m = constants::kRb85MassU * constants::kAtomicMass;
    const double l = spacing_um * 1e-6;
    return constants::kPlanck / (8.0 * m * l * l);
}

double LatticeConfig::peak_depth_er() const {
    // Mean of exp(-2 r^2 / w^2) over a 2D Gaussian cloud is 1 / (1 + 4 sigma^2 / w^2).
    return depth_er * (1.0 + 4.0 * cloud_sigma_um * cloud_sigma_um / (waist_um * waist_um));
}

void LatticeConfig::validate() const {
    for (double v : {spacing_um, angle_deg, wavelength_nm, depth_er, tilt_er, waist_um, cloud_sigma_um})
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("lattice parameters must be positive");
    if (!(temperature_uk >= 0.0) || !std::isfinite(temperature_uk))
        throw ValidationError("temperature must be non-negative");
}

namespace {

// E1 - E0 (in E_R) of V = s sin^2(pi x / L) at zero quasimomentum. Plane waves
// exp(2 pi i j x / L) have kinetic energy 4 j^2 and couple to j +- 1 with -s/4.
double band_gap_er(double s, std::size_t basis) {
    const auto half = static_cast<lapack_int>(basis / 2);
    const lapack_int n = 2 * half + 1;
    std::vector<double> diag(static_cast<std::size_t>(n)), off(static_cast<std::size_t>(n - 1), -0.25 * s);
    for (lapack_int i = 0; i < n; ++i) {
        const double j = static_cast<double>(i - half);
        diag[static_cast<std::size_t>(i)] = 4.0 * j * j + 0.5 * s;
    }
    // Bisection for the two lowest eigenvalues only.
    lapack_int found = 0, nsplit = 0;
    std::vector<double> w(static_cast<std::size_t>(n));
    std::vector<lapack_int> iblock(static_cast<std::size_t>(n)), isplit(static_cast<std::size_t>(n));
    const lapack_int info = LAPACKE_dstebz('I', 'E', n, 0.0, 0.0, 1, 2, 0.0, diag.data(), off.data(), &found, &nsplit,
                                           w.data(), iblock.data(), isplit.data());
    if (info != 0 || found < 2) throw ConvergenceError("lattice eigenvalue bisection failed", 0.0);
    return w[1] - w[0];
}

// Linear interpolation table of the numeric gap on [0, s_max].
class GapTable {
public:
    GapTable(double s_max, double recoil_hz) : step_(s_max / kIntervals), khz_(recoil_hz * 1e-3) {
        values_.resize(kIntervals + 1);
        for (std::size_t i = 0; i <= kIntervals; ++i) values_[i] = band_gap_er(step_ * static_cast<double>(i), 201);
    }
    double operator()(double s) const {
        const double x = std::clamp(s / step_, 0.0, static_cast<double>(kIntervals));
        const auto i = std::min(static_cast<std::size_t>(x), kIntervals - 1);
        const double f = x - static_cast<double>(i);
        return khz_ * ((1.0 - f) * values_[i] + f * values_[i + 1]);
    }

private:
    static constexpr std::size_t kIntervals = 4000;
    double step_, khz_;
    std::vector<double> values_;
};

}  // namespace

double depth_to_frequency(double s, DepthModel mode, double recoil_hz, std::size_t basis) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("lattice depth must be positive");
    if (!(recoil_hz > 0.0)) throw ValidationError("recoil frequency must be positive");
    if (mode == DepthModel::harmonic) return 2.0 * std::sqrt(s) * recoil_hz * 1e-3;
    if (basis < 3) throw ValidationError("basis too small");
    const double gap = band_gap_er(s, basis);
    const double finer = band_gap_er(s, 2 * basis + 1);
    if (std::abs(finer - gap) * recoil_hz > 1.0)
        throw ConvergenceError("lattice diagonalization not converged in basis size", finer * recoil_hz * 1e-3);
    return gap * recoil_hz * 1e-3;
}

double BallisticAtom::radius_um(double t) const { return std::hypot(x0_um + vx_um_ms * t, y0_um + vy_um_ms * t); }

BallisticEnsemble ballistic_ensemble(const LatticeConfig& config, std::size_t n, std::uint64_t seed,
                                     const BallisticOptions& options) {
    config.validate();
    if (n == 0) throw ValidationError("ensemble size must be at least 1");
    if (!(options.step_ms > 0.0) || !(options.t_max_ms > options.step_ms))
        throw ValidationError("ballistic time grid needs 0 < step < t_max");
    const double er = config.recoil_hz();
    const double s_peak = config.peak_depth_er();
    const double w2 = config.waist_um * config.waist_um;
    // sqrt(kT/m) in um/ms (1 m/s = 1000 um/ms).
    const double m = constants::kRb85MassU * constants::kAtomicMass;
    const double sigma_v = std::sqrt(constants::kBoltzmann * config.temperature_uk * 1e-6 / m) * 1e3;

    std::optional<GapTable> table;
    if (config.depth_model == DepthModel::numeric) {
        depth_to_frequency(s_peak, DepthModel::numeric, er);  // basis convergence at the deepest point
        table.emplace(s_peak, er);
    }
    auto frequency = [&](double s) { return table ? (*table)(s) : 2.0 * std::sqrt(s) * er * 1e-3; };

    const auto steps = static_cast<std::size_t>(std::floor(options.t_max_ms / options.step_ms + 1e-9));
    std::vector<double> times(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) times[i] = static_cast<double>(i) * options.step_ms;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    BallisticEnsemble out;
    out.atoms.reserve(n);
    out.trajectories.reserve(n);
    std::vector<double> freqs(times.size());
    for (std::size_t k = 0; k < n; ++k) {
        BallisticAtom a{};
        a.x0_um = config.cloud_sigma_um * normal(rng);
        a.y0_um = config.cloud_sigma_um * normal(rng);
        a.vx_um_ms = sigma_v * normal(rng);
        a.vy_um_ms = sigma_v * normal(rng);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double r = a.radius_um(times[i]);
            freqs[i] = frequency(s_peak * std::exp(-2.0 * r * r / w2));
        }
        out.atoms.push_back(a);
        out.trajectories.emplace_back(times, freqs, Interpolation::monotone_cubic, Extension::hold);
    }
    return out;
}

BaselineEcho baseline_echo(const LatticeConfig& config, std::size_t n, std::uint64_t seed,
                           const std::vector<double>& tau_ms, const PlateauOptions& plateau) {
    return baseline_echo(ballistic_ensemble(config, n, seed), tau_ms, plateau);
}

BaselineEcho baseline_echo(const BallisticEnsemble& ensemble, const std::vector<double>& tau_ms,
                           const PlateauOptions& plateau) {
    BaselineEcho out;
    out.curve = echo_from_trajectories(ensemble.trajectories, tau_ms);
    out.plateau = detect_plateau(out.curve, plateau);
    for (double se : out.curve.std_error)
        if (se > 0.02) out.resolution_warning = true;
    return out;
}

TrajectoryCensus baseline_trajectory_census(const std::vector<Trajectory>& ensemble,
                                            const std::array<double, 3>& node_times_ms, double tolerance_khz) {
    TrajectoryCensus c;
    c.total = ensemble.size();
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    for (const auto& t : ensemble) {
        const double w0 = t(node_times_ms[0]), w2 = t(node_times_ms[1]), w5 = t(node_times_ms[2]);
        const double d1 = w2 - w0, d2 = w5 - w2;
        s1 += d1;
        s2 += d2;
        s11 += d1 * d1;
        s22 += d2 * d2;
        s12 += d1 * d2;
        if (std::abs(d1) <= tolerance_khz || std::abs(d2) <= tolerance_khz)
            ++c.degenerate;
        else if (d1 > 0)
            ++(d2 > 0 ? c.up_up : c.up_down);
        else
            ++(d2 > 0 ? c.down_up : c.down_down);
    }
    if (c.total > 1) {
        const double n = static_cast<double>(c.total);
        const double v1 = s11 / n - (s1 / n) * (s1 / n);
        const double v2 = s22 / n - (s2 / n) * (s2 / n);
        const double cov = s12 / n - (s1 / n) * (s2 / n);
        if (v1 > 0.0 && v2 > 0.0) c.increment_correlation = cov / std::sqrt(v1 * v2);
    }
    return c;
}

}  // namespace echolab
