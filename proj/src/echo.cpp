#include "echolab/echo.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>

#include "echolab/errors.hpp"
#include "echolab/format.hpp"
#include "echolab/quadrature.hpp"

namespace echolab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Tensor Gauss-Legendre over the cube [-h, h]^3 in z, with w = mu + L z. The Gaussian
// part of the density becomes exp(-|z|^2 / 2); the skewing factor is Phi((L' alpha) . z).
std::vector<double> echo_on_grid(const SkewNormal& model, const std::vector<double>& taus, std::size_t n,
                                 double half_width, Interpolation method, Extension extension) {
    quad::Rule rule;
    quad::map_rule(quad::gauss_legendre(n), -half_width, half_width, rule.nodes, rule.weights);
    const Eigen::Matrix3d& l = model.cholesky();
    const Eigen::Vector3d& mu = model.mean_vector();
    const Eigen::Vector3d beta = l.transpose() * model.alpha_vector();
    const auto& times = model.params().node_times_ms;

    std::vector<double> gauss(n);
    for (std::size_t i = 0; i < n; ++i) gauss[i] = rule.weights[i] * std::exp(-0.5 * rule.nodes[i] * rule.nodes[i]);

    std::vector<std::complex<double>> acc(taus.size(), 0.0);
    double mass = 0.0;
    double max_weight = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        max_weight = std::max(max_weight, gauss[i]);
    const double cutoff = 1e-17 * max_weight * max_weight * max_weight;

    for (std::size_t i = 0; i < n; ++i) {
        const double z0 = rule.nodes[i];
        for (std::size_t j = 0; j < n; ++j) {
            const double z1 = rule.nodes[j];
            const double gij = gauss[i] * gauss[j];
            for (std::size_t k = 0; k < n; ++k) {
                const double z2 = rule.nodes[k];
                const double w = gij * gauss[k] * normal_cdf(beta[0] * z0 + beta[1] * z1 + beta[2] * z2);
                if (w < cutoff) continue;
                const FrequencyTriple f{mu[0] + l(0, 0) * z0, mu[1] + l(1, 0) * z0 + l(1, 1) * z1,
                                        mu[2] + l(2, 0) * z0 + l(2, 1) * z1 + l(2, 2) * z2};
                const Trajectory traj = interpolate(f, method, extension, times);
                mass += w;
                for (std::size_t t = 0; t < taus.size(); ++t)
                    acc[t] += w * std::polar(1.0, -accumulated_phase(traj, 0.5 * taus[t]));
            }
        }
    }
    std::vector<double> eps(taus.size());
    for (std::size_t t = 0; t < taus.size(); ++t) eps[t] = std::abs(acc[t]) / mass;
    return eps;
}

void check_taus(const std::vector<double>& taus) {
    if (taus.empty()) throw ValidationError("tau grid is empty");
    for (double t : taus)
        if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("tau values must be finite and non-negative");
}

// Least-squares slope of log(eps) against tau on [lo, hi]; returns the decay constant
// (ms) or nothing when the fitted slope is not negative.
std::optional<double> exp_fit(const std::vector<double>& tau, const std::vector<double>& eps, std::size_t lo,
                              std::size_t hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t i = lo; i <= hi; ++i) {
        if (!(eps[i] > 0.0)) continue;
        const double y = std::log(eps[i]);
        sx += tau[i];
        sy += y;
        sxx += tau[i] * tau[i];
        sxy += tau[i] * y;
        ++m;
    }
    if (m < 2) return std::nullopt;
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    if (denom <= 0.0) return std::nullopt;
    const double slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
    if (!(slope < 0.0)) return std::nullopt;
    return -1.0 / slope;
}

}  // namespace

std::vector<double> tau_grid(double t_max_ms, double step_ms) {
    if (!(step_ms > 0.0) || !(t_max_ms >= 0.0)) throw ValidationError("tau grid needs step > 0 and t_max >= 0");
    const auto n = static_cast<std::size_t>(std::floor(t_max_ms / step_ms + 1e-9));
    std::vector<double> out(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out[i] = static_cast<double>(i) * step_ms;
    return out;
}

double accumulated_phase(const Trajectory& traj, double t1_ms) {
    return kTwoPi * (traj.integral(2.0 * t1_ms) - 2.0 * traj.integral(t1_ms));
}

bool EchoCurve::all_converged() const {
    return std::all_of(converged.begin(), converged.end(), [](bool b) { return b; });
}

EchoCurve echo_amplitude(const SkewNormalParams& params, const std::vector<double>& tau_ms,
                         const EchoOptions& options) {
    check_taus(tau_ms);
    if (options.nodes < 2 || !(options.half_width > 0.0)) throw ValidationError("echo quadrature needs >= 2 nodes");
    const SkewNormal model(params);
    EchoCurve c;
    c.tau_ms = tau_ms;
    c.method = options.method;
    c.extension = options.extension;
    c.nodes = options.nodes;
    c.half_width = options.half_width;
    c.epsilon = echo_on_grid(model, tau_ms, options.nodes, options.half_width, options.method, options.extension);
    c.converged.assign(tau_ms.size(), true);
    if (options.check_convergence) {
        const auto finer = echo_on_grid(model, tau_ms, options.nodes + options.resolution_step, options.half_width,
                                        options.method, options.extension);
        for (std::size_t t = 0; t < tau_ms.size(); ++t) {
            const double d = std::abs(finer[t] - c.epsilon[t]);
            c.max_change = std::max(c.max_change, d);
            c.converged[t] = d <= options.tolerance;
        }
    }
    c.model_dependent.resize(tau_ms.size());
    for (std::size_t t = 0; t < tau_ms.size(); ++t) c.model_dependent[t] = tau_ms[t] > params.node_times_ms[2] + 1e-12;
    return c;
}

EchoCurve echo_from_trajectories(const std::vector<Trajectory>& trajectories, const std::vector<double>& tau_ms) {
    check_taus(tau_ms);
    if (trajectories.empty()) throw ValidationError("no trajectories");
    const auto n = static_cast<double>(trajectories.size());
    EchoCurve c;
    c.tau_ms = tau_ms;
    c.source = "monte_carlo";
    c.nodes = trajectories.size();
    c.method = trajectories.front().method();
    c.extension = trajectories.front().extension();
    c.epsilon.resize(tau_ms.size());
    c.std_error.resize(tau_ms.size());
    c.converged.assign(tau_ms.size(), true);
    c.model_dependent.resize(tau_ms.size());
    std::vector<std::complex<double>> z(trajectories.size());
    for (std::size_t t = 0; t < tau_ms.size(); ++t) {
        std::complex<double> mean = 0.0;
        for (std::size_t k = 0; k < trajectories.size(); ++k) {
            z[k] = std::polar(1.0, -accumulated_phase(trajectories[k], 0.5 * tau_ms[t]));
            mean += z[k];
        }
        mean /= n;
        c.epsilon[t] = std::abs(mean);
        // Spread of the draws projected on the direction of the mean.
        const std::complex<double> u = c.epsilon[t] > 0.0 ? mean / c.epsilon[t] : 1.0;
        double var = 0.0;
        for (const auto& v : z) {
            const double p = (v * std::conj(u)).real() - c.epsilon[t];
            var += p * p;
        }
        c.std_error[t] = trajectories.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
        c.model_dependent[t] = tau_ms[t] > trajectories.front().times().back() + 1e-12;
    }
    return c;
}

EchoCurve echo_monte_carlo(const SkewNormalParams& params, const std::vector<double>& tau_ms, std::size_t n,
                           std::uint64_t seed, Interpolation method, Extension extension) {
    const SkewNormal model(params);
    const auto draws = sn_sample(model, n, seed);
    std::vector<Trajectory> trajs;
    trajs.reserve(n);
    for (const auto& w : draws) trajs.push_back(interpolate(w, method, extension, params.node_times_ms));
    return echo_from_trajectories(trajs, tau_ms);
}

FreeDephasing free_dephasing(const SkewNormalParams& params, const std::vector<double>& t_ms) {
    check_taus(t_ms);
    const SkewNormal model(params);
    const double sd = std::sqrt(model.covariance()(0, 0));
    const double a = marginal_alpha(model.covariance(), model.alpha_vector(), 0);
    const double mu = model.mean_vector()[0];
    // Node-0 marginal on mu +- 10 sd; 64 panels of order 20 resolve the oscillation
    // up to |t| * 20 sd ~ 100 cycles.
    std::vector<double> x, w, px, pw;
    const auto& rule = quad::gauss_legendre(20);
    const double lo = mu - 10.0 * sd, span = 20.0 * sd;
    constexpr std::size_t kPanels = 64;
    for (std::size_t p = 0; p < kPanels; ++p) {
        quad::map_rule(rule, lo + span * static_cast<double>(p) / kPanels,
                       lo + span * static_cast<double>(p + 1) / kPanels, px, pw);
        x.insert(x.end(), px.begin(), px.end());
        w.insert(w.end(), pw.begin(), pw.end());
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double y = x[i] - mu;
        w[i] *= std::exp(-0.5 * y * y / (sd * sd)) * normal_cdf(a * y);
        mass += w[i];
    }
    FreeDephasing out;
    out.t_ms = t_ms;
    out.decay.resize(t_ms.size());
    for (std::size_t t = 0; t < t_ms.size(); ++t) {
        std::complex<double> s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::polar(1.0, -kTwoPi * x[i] * t_ms[t]);
        out.decay[t] = std::abs(s) / mass;
    }
    const double target = std::exp(-1.0);
    for (std::size_t t = 1; t < t_ms.size(); ++t) {
        if (out.decay[t] <= target && out.decay[t - 1] > target) {
            const double f = (out.decay[t - 1] - target) / (out.decay[t - 1] - out.decay[t]);
            out.one_over_e_ms = t_ms[t - 1] + f * (t_ms[t] - t_ms[t - 1]);
            break;
        }
    }
    return out;
}

PlateauReport detect_plateau(const EchoCurve& curve, const PlateauOptions& options) {
    return detect_plateau(curve.tau_ms, curve.epsilon, options);
}

PlateauReport detect_plateau(const std::vector<double>& tau, const std::vector<double>& eps,
                             const PlateauOptions& options) {
    if (tau.size() != eps.size() || tau.size() < 3) throw ValidationError("insufficient echo data");
    if (tau.back() - tau.front() < 2.0) throw ValidationError("insufficient echo data: curve spans less than 2 ms");
    for (std::size_t i = 1; i < tau.size(); ++i)
        if (!(tau[i] > tau[i - 1]) || tau[i] - tau[i - 1] > 0.1 + 1e-9)
            throw ValidationError("echo curve must be sampled increasingly at steps <= 0.1 ms");
    const std::size_t n = tau.size();

    // First segment: down to 1/e of the start value or up to the first rise.
    const double target = eps.front() * std::exp(-1.0);
    std::size_t e = n - 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (eps[i] > eps[i - 1]) {
            e = i - 1;
            break;
        }
        if (eps[i] <= target) {
            e = i;
            break;
        }
    }
    PlateauReport r;
    r.initial_end_ms = tau[e];
    const auto initial = exp_fit(tau, eps, 0, std::max<std::size_t>(e, 1));
    r.steepest_decay_ms = std::numeric_limits<double>::infinity();
    if (!initial) {
        // No decay at all: nothing to call a second stage.
        r.initial_decay_ms = std::numeric_limits<double>::infinity();
        return r;
    }
    r.initial_decay_ms = *initial;
    for (std::size_t i = 1; i <= std::max<std::size_t>(e, 1); ++i) {
        if (!(eps[i] > 0.0) || !(eps[i - 1] > eps[i])) continue;
        r.steepest_decay_ms = std::min(r.steepest_decay_ms, (tau[i] - tau[i - 1]) / std::log(eps[i - 1] / eps[i]));
    }

    // Longest run of points after the initial decay with small relative slope.
    std::size_t best_lo = e, best_hi = e, run_lo = e;
    bool in_run = false;
    double best_len = -1.0;
    for (std::size_t i = e; i < n; ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1, b = std::min(i + 1, n - 1);
        const double slope = (eps[b] - eps[a]) / (tau[b] - tau[a]);
        const bool flat = eps[i] > 0.0 && std::abs(slope) < options.slope_threshold * eps[i];
        if (flat && !in_run) {
            run_lo = i;
            in_run = true;
        }
        if (in_run && (!flat || i == n - 1)) {
            const std::size_t run_hi = flat ? i : i - 1;
            const double len = tau[run_hi] - tau[run_lo];
            if (len > best_len) {
                best_len = len;
                best_lo = run_lo;
                best_hi = run_hi;
            }
            in_run = false;
        }
    }
    if (best_len >= 0.0) {
        r.start_ms = tau[best_lo];
        r.end_ms = tau[best_hi];
        double s = 0.0;
        for (std::size_t i = best_lo; i <= best_hi; ++i) s += eps[i];
        r.level = s / static_cast<double>(best_hi - best_lo + 1);
        r.detected = best_len >= options.min_length_ms - 1e-9;
    }
    if (r.detected && best_hi + 2 < n) {
        std::size_t hi = n - 1;
        for (std::size_t i = best_hi + 1; i < n; ++i) {
            if (eps[i] <= r.level * std::exp(-1.0)) {
                hi = i;
                break;
            }
        }
        r.final_decay_ms = exp_fit(tau, eps, best_hi, hi);
    }
    return r;
}

std::vector<SweepCell> correlation_sweep(const SkewNormalParams& params, const std::vector<double>& rho25_values,
                                         const std::vector<double>& rho05_values, const std::vector<double>& tau_ms,
                                         const EchoOptions& echo, const PlateauOptions& plateau) {
    std::vector<SweepCell> cells;
    for (double r25 : rho25_values) {
        for (double r05 : rho05_values) {
            SweepCell c;
            c.rho25 = r25;
            c.rho05 = r05;
            SkewNormalParams p = params;
            p.rho[1] = r25;
            p.rho[2] = r05;
            c.feasible = std::abs(r25) < 1.0 && std::abs(r05) < 1.0 && is_valid(p);
            if (c.feasible) {
                const EchoCurve curve = echo_amplitude(p, tau_ms, echo);
                c.converged = curve.all_converged();
                c.report = detect_plateau(curve, plateau);
            }
            cells.push_back(c);
        }
    }
    return cells;
}

void write_echo_csv(std::ostream& os, const EchoCurve& curve) {
    const bool mc = !curve.std_error.empty();
    os << "tau_ms,epsilon,converged_flag,model_dependent" << (mc ? ",std_error" : "") << '\n';
    for (std::size_t t = 0; t < curve.tau_ms.size(); ++t) {
        os << format_number(curve.tau_ms[t]) << ',' << format_number(curve.epsilon[t]) << ','
           << (curve.converged[t] ? 1 : 0) << ',' << (curve.model_dependent[t] ? 1 : 0);
        if (mc) os << ',' << format_number(curve.std_error[t]);
        os << '\n';
    }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
    os << "rho25,rho05,rho_difference,feasible,plateau_detected,plateau_length_ms,initial_decay_ms,converged\n";
    for (const auto& c : cells) {
        os << format_number(c.rho25) << ',' << format_number(c.rho05) << ',' << format_number(c.rho25 - c.rho05) << ','
           << (c.feasible ? 1 : 0) << ',' << (c.report.detected ? 1 : 0) << ','
           << format_number(c.feasible ? c.report.length_ms() : 0.0) << ','
           << format_number(c.feasible ? c.report.initial_decay_ms : 0.0) << ',' << (c.converged ? 1 : 0) << '\n';
    }
}

}  // namespace echolab
