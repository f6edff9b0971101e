#include "echolab/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "echolab/errors.hpp"
#include "echolab/gaussian_fit.hpp"

namespace echolab {

NodePair pair_for_delay(double delay_ms) {
    if (std::abs(delay_ms - 2.0) < 1e-9) return {0, 1};
    if (std::abs(delay_ms - 3.0) < 1e-9) return {1, 2};
    if (std::abs(delay_ms - 5.0) < 1e-9) return {0, 2};
    throw ValidationError("delay must be 2, 3 or 5 ms");
}

void Dataset::validate() const {
    for (std::size_t k = 0; k < 3; ++k) {
        grids[k].validate();
        if (std::abs(grids[k].delay_ms - kDelaysMs[k]) > 1e-9) throw ValidationError("dataset delays must be (2, 3, 5) ms");
        if (grids[k].probe_khz != grids[0].probe_khz || grids[k].pump_khz != grids[0].pump_khz)
            throw ValidationError("dataset grids must share their axes");
        if (probe_alone[k].freq_khz != grids[0].probe_khz || probe_alone[k].values.size() != grids[0].cols())
            throw ValidationError("probe-alone spectra must use the probe axis");
    }
    pulses.pump.validate();
    pulses.probe.validate();
    if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be non-negative");
}

std::vector<double> convolve_1d(const std::vector<double>& values, const std::vector<double>& kernel) {
    const long n = static_cast<long>(values.size());
    const long half = (static_cast<long>(kernel.size()) - 1) / 2;
    std::vector<double> out(values.size(), 0.0);
    for (long i = 0; i < n; ++i) {
        double s = 0.0;
        for (long k = 0; k < static_cast<long>(kernel.size()); ++k) {
            const long j = i - (k - half);
            if (j >= 0 && j < n) s += kernel[static_cast<std::size_t>(k)] * values[static_cast<std::size_t>(j)];
        }
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

SpectrumGrid2D convolve_2d(const SpectrumGrid2D& bare, const std::vector<double>& pump_kernel,
                           const std::vector<double>& probe_kernel) {
    SpectrumGrid2D tmp = bare;
    const std::size_t rows = bare.rows(), cols = bare.cols();
    std::vector<double> line;
    for (std::size_t i = 0; i < rows; ++i) {
        line.assign(bare.values.begin() + static_cast<long>(i * cols), bare.values.begin() + static_cast<long>((i + 1) * cols));
        const auto c = convolve_1d(line, probe_kernel);
        std::copy(c.begin(), c.end(), tmp.values.begin() + static_cast<long>(i * cols));
    }
    SpectrumGrid2D out = tmp;
    line.resize(rows);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < rows; ++i) line[i] = tmp.at(i, j);
        const auto c = convolve_1d(line, pump_kernel);
        for (std::size_t i = 0; i < rows; ++i) out.at(i, j) = c[i];
    }
    out.kind = SpectrumKind::convolved_marginal;
    return out;
}

namespace {

void check_mass_loss(double bare, double convolved) {
    if (bare <= 0.0) return;
    const double loss = 1.0 - convolved / bare;
    if (loss > 1e-3)
        throw CoverageError("convolution loses " + std::to_string(loss) + " of the mass at the grid edges",
                            convolved / bare);
}

}  // namespace

SpectrumGrid2D convolved_marginal(const SkewNormal& model, NodePair keep, const PulsePair& pulses,
                                  const GridSpec& pump_grid, const GridSpec& probe_grid) {
    const SpectrumGrid2D bare = sn_marginal_2d(model, keep).evaluate(pump_grid.axis(), probe_grid.axis());
    SpectrumGrid2D g = convolve_2d(bare, convolution_kernel(pulses.pump, pump_grid.step),
                                   convolution_kernel(pulses.probe, probe_grid.step));
    check_mass_loss(bare.mass(), g.mass());
    return g;
}

Spectrum1D probe_alone_spectrum(const SkewNormal& model, int node, const PulseSpec& probe, const GridSpec& grid) {
    Spectrum1D s;
    s.freq_khz = grid.axis();
    const auto bare = sn_marginal_1d(model, node).evaluate(s.freq_khz);
    s.values = convolve_1d(bare, convolution_kernel(probe, grid.step));
    double bare_mass = 0.0;
    for (double v : bare) bare_mass += v * grid.step;
    check_mass_loss(bare_mass, s.mass());
    return s;
}

HoleSpectrum hole_spectrum(const SkewNormal& model, double pump_khz, double delay_ms, const PulsePair& pulses,
                           const GridSpec& grid) {
    const NodePair keep = pair_for_delay(delay_ms);
    HoleSpectrum h;
    h.pump_khz = pump_khz;
    h.delay_ms = delay_ms;
    h.profile.freq_khz = grid.axis();
    h.profile.values.assign(h.profile.freq_khz.size(), 0.0);
    const auto& axis = h.profile.freq_khz;
    if (pump_khz < axis.front() || pump_khz > axis.back()) {
        h.empty = true;
        return h;
    }

    // Pump selectivity: main lobe of the pump spectrum centred on the pump frequency.
    const double lobe = 1.0 / pulses.pump.duration_ms();
    const BivariateMarginal bare = sn_marginal_2d(model, keep);
    std::vector<double> row(axis.size(), 0.0);
    double wsum = 0.0;
    for (double a : axis) {
        const double off = pump_khz - a;
        if (std::abs(off) >= lobe) continue;
        const double w = power_density(pulses.pump, pulses.pump.omega_m_khz + off);
        wsum += w;
        for (std::size_t j = 0; j < axis.size(); ++j) row[j] += w * bare(a, axis[j]);
    }
    if (wsum > 0.0)
        for (double& v : row) v /= wsum;
    auto profile = convolve_1d(row, convolution_kernel(pulses.probe, grid.step));
    const double peak = *std::max_element(profile.begin(), profile.end());
    if (!(peak > 1e-300)) {
        h.empty = true;
        return h;
    }
    for (double& v : profile) v /= peak;
    h.profile.values = std::move(profile);
    return h;
}

HoleWidthCurve hole_width_curve(const SkewNormal& model, double pump_khz, const PulsePair& pulses,
                                const GridSpec& grid) {
    HoleWidthCurve c;
    for (double d : kDelaysMs) {
        const HoleSpectrum h = hole_spectrum(model, pump_khz, d, pulses, grid);
        HoleWidthPoint p{d, 0.0, true};
        if (h.empty) {
            p.fit_ok = false;
        } else {
            try {
                p.width_hz = 1000.0 * fit_gaussian(h.profile.freq_khz, h.profile.values).sigma;
            } catch (const FitError& e) {
                p.width_hz = 1000.0 * e.fallback_width();
                p.fit_ok = false;
            }
        }
        c.points.push_back(p);
    }
    try {
        c.instrumental_hz = instrumental_width(pulses.pump, pulses.probe);
    } catch (const FitError& e) {
        c.instrumental_hz = e.fallback_width();
    }
    const Spectrum1D p0 = probe_alone_spectrum(model, 0, pulses.probe, grid);
    try {
        c.inhomogeneous_hz = 1000.0 * fit_gaussian(p0.freq_khz, p0.values).sigma;
    } catch (const FitError& e) {
        c.inhomogeneous_hz = 1000.0 * e.fallback_width();
    }
    return c;
}

Dataset synth_dataset(const SkewNormalParams& truth, const PulsePair& pulses, const GridSpec& grid, double noise_sigma,
                      std::uint64_t seed) {
    if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be non-negative");
    const SkewNormal model(truth);
    Dataset d;
    d.pulses = pulses;
    d.seed = seed;
    d.noise_sigma = noise_sigma;
    d.truth = truth;
    for (std::size_t k = 0; k < 3; ++k) {
        d.grids[k] = convolved_marginal(model, pair_for_delay(kDelaysMs[k]), pulses, grid, grid);
        d.grids[k].delay_ms = kDelaysMs[k];
        d.grids[k].kind = SpectrumKind::measured;
        d.probe_alone[k] = probe_alone_spectrum(model, static_cast<int>(k), pulses.probe, grid);
    }
    if (noise_sigma > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto add_noise = [&](std::vector<double>& v) {
            const double sd = noise_sigma * *std::max_element(v.begin(), v.end());
            for (double& x : v) x += sd * normal(rng);
        };
        for (auto& g : d.grids) add_noise(g.values);
        for (auto& p : d.probe_alone) add_noise(p.values);
    }
    return d;
}

// ---------------------------------------------------------------------------

SurfaceModel::SurfaceModel(const Dataset& layout)
    : pump_axis_(layout.grids[0].pump_khz), probe_axis_(layout.grids[0].probe_khz),
      pump_kernel_(convolution_kernel(layout.pulses.pump, axis_step(pump_axis_))),
      probe_kernel_(convolution_kernel(layout.pulses.probe, axis_step(probe_axis_))) {}

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

bool SurfaceModel::evaluate(const SkewNormalParams& params, Surfaces& out) const {
    if (!is_valid(params)) return false;
    const Eigen::Matrix3d om = covariance(params);
    const Eigen::Vector3d al(params.alpha[0], params.alpha[1], params.alpha[2]);
    const auto& mu = params.mu_khz;
    const std::size_t nr = pump_axis_.size(), nc = probe_axis_.size();

    for (std::size_t k = 0; k < 3; ++k) {
        const auto [a, b] = pair_for_delay(kDelaysMs[k]);
        const int c = 3 - a - b;
        Eigen::Matrix2d o2;
        o2 << om(a, a), om(a, b), om(b, a), om(b, b);
        const Eigen::Matrix2d inv2 = o2.inverse();
        const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(o2.determinant()));
        const Eigen::Vector2d oc(om(a, c), om(b, c));
        const double cond_var = om(c, c) - oc.dot(inv2 * oc);
        const Eigen::Vector2d astar =
            (Eigen::Vector2d(al[a], al[b]) + inv2 * oc * al[c]) / std::sqrt(1.0 + al[c] * al[c] * cond_var);
        std::vector<double> m(nr * nc);
        for (std::size_t i = 0; i < nr; ++i) {
            const double ya = pump_axis_[i] - mu[a];
            for (std::size_t j = 0; j < nc; ++j) {
                const double yb = probe_axis_[j] - mu[b];
                const double q = inv2(0, 0) * ya * ya + 2.0 * inv2(0, 1) * ya * yb + inv2(1, 1) * yb * yb;
                m[i * nc + j] = 2.0 * norm * std::exp(-0.5 * q) * normal_cdf(astar[0] * ya + astar[1] * yb);
            }
        }
        SpectrumGrid2D bare(pump_axis_, probe_axis_, kDelaysMs[k], SpectrumKind::bare_marginal);
        bare.values = std::move(m);
        out.grids[k] = convolve_2d(bare, pump_kernel_, probe_kernel_).values;
    }

    for (int k = 0; k < 3; ++k) {
        const double astar = marginal_alpha(om, al, k);
        const double sd = std::sqrt(om(k, k));
        std::vector<double> v(nc);
        for (std::size_t j = 0; j < nc; ++j) {
            const double y = probe_axis_[j] - mu[static_cast<std::size_t>(k)];
            const double z = y / sd;
            v[j] = 2.0 * kInvSqrt2Pi / sd * std::exp(-0.5 * z * z) * normal_cdf(astar * y);
        }
        out.probe_alone[static_cast<std::size_t>(k)] = convolve_1d(v, probe_kernel_);
    }
    return true;
}

}  // namespace echolab
