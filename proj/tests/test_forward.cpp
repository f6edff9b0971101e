#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "echolab/errors.hpp"
#include "echolab/forward.hpp"
#include "echolab/gaussian_fit.hpp"
#include "echolab/inference.hpp"
#include "oracles.hpp"

using namespace echolab;

namespace {

double second_moment(const std::vector<double>& x, const std::vector<double>& y) {
    double m0 = 0, m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        m0 += y[i];
        m1 += y[i] * x[i];
        m2 += y[i] * x[i] * x[i];
    }
    return m2 / m0 - (m1 / m0) * (m1 / m0);
}

// Variance of the marginal along the pump (axis 0) or probe (axis 1) direction of a grid.
double grid_variance(const SpectrumGrid2D& g, int axis) {
    std::vector<double> profile(axis == 0 ? g.rows() : g.cols(), 0.0);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) profile[axis == 0 ? i : j] += g.at(i, j);
    return second_moment(axis == 0 ? g.pump_khz : g.probe_khz, profile);
}

const PulsePair kPulses{};
// Wide enough that the kernels never spill past the edges.
const GridSpec kWideGrid{1.0, 12.0, 0.05};
const PulsePair kDeltaPulses{PulseSpec{6.0, 2 * std::numbers::pi / 72, 512}, PulseSpec{6.0, 2 * std::numbers::pi / 72, 512}};

}  // namespace

TEST_CASE("2D convolution matches a brute-force double sum") {
    SpectrumGrid2D g({0, 1, 2, 3, 4}, {0, 1, 2, 3}, 2.0, SpectrumKind::bare_marginal);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = 1.0 + std::sin(1.3 * static_cast<double>(i));
    const std::vector<double> kp{0.2, 0.5, 0.3}, kq{0.1, 0.2, 0.4, 0.2, 0.1};
    const auto out = convolve_2d(g, kp, kq);
    for (long i = 0; i < 5; ++i)
        for (long j = 0; j < 4; ++j) {
            double ref = 0.0;
            for (long a = 0; a < 5; ++a)
                for (long b = 0; b < 4; ++b) {
                    const long u = i - a + 1, v = j - b + 2;  // kernel indices, centres 1 and 2
                    if (u >= 0 && u < 3 && v >= 0 && v < 5) ref += kp[u] * kq[v] * g.at(a, b);
                }
            CHECK(out.at(i, j) == doctest::Approx(ref).epsilon(1e-14).scale(0));
        }
}

TEST_CASE("convolution conserves the mass of the bare marginal") {
    const SkewNormal m(averaged_params());
    for (double delay : kDelaysMs) {
        const auto keep = pair_for_delay(delay);
        const auto wide = convolved_marginal(m, keep, kPulses, kWideGrid, kWideGrid);
        const auto wa = kWideGrid.axis();
        CHECK(std::abs(wide.mass() - sn_marginal_2d(m, keep).evaluate(wa, wa).mass()) < 1e-6);
        // Default grid: zero padding loses a little at the edges but unit mass holds.
        const auto g = convolved_marginal(m, keep, kPulses, kModelGrid, kModelGrid);
        CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-4).scale(0));
        for (double v : g.values) CHECK(v >= 0.0);
    }
}

TEST_CASE("delta-like pulses leave the marginal unchanged") {
    const SkewNormal m(averaged_params());
    const auto g = convolved_marginal(m, {0, 1}, kDeltaPulses, kModelGrid, kModelGrid);
    const auto axis = kModelGrid.axis();
    const auto bare = sn_marginal_2d(m, {0, 1}).evaluate(axis, axis);
    double peak = 0;
    for (double v : bare.values) peak = std::max(peak, v);
    for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(std::abs(g.values[i] - bare.values[i]) <= 0.01 * peak);
}

TEST_CASE("convolved marginal is wider than the bare one along both axes") {
    const SkewNormal m(averaged_params());
    const auto g = convolved_marginal(m, {0, 1}, kPulses, kWideGrid, kWideGrid);
    const auto axis = kWideGrid.axis();
    const auto bare = sn_marginal_2d(m, {0, 1}).evaluate(axis, axis);
    CHECK(grid_variance(g, 0) > grid_variance(bare, 0));
    CHECK(grid_variance(g, 1) > grid_variance(bare, 1));
    // Convolution adds the kernel variance along each axis.
    const auto k = convolution_kernel(kPulses.probe, kWideGrid.step);
    std::vector<double> offs(k.size());
    for (std::size_t i = 0; i < k.size(); ++i)
        offs[i] = (static_cast<double>(i) - static_cast<double>(k.size() - 1) / 2) * kWideGrid.step;
    CHECK(grid_variance(g, 1) == doctest::Approx(grid_variance(bare, 1) + second_moment(offs, k)).epsilon(1e-6).scale(0));
}

TEST_CASE("probe-alone spectrum: delta limit and moment oracle") {
    const auto p = averaged_params();
    const SkewNormal m(p);
    const auto axis = kModelGrid.axis();
    const auto delta = probe_alone_spectrum(m, 0, kDeltaPulses.probe, kModelGrid);
    const auto m1 = sn_marginal_1d(m, 0);
    for (std::size_t i = 0; i < axis.size(); ++i) CHECK(delta.values[i] == doctest::Approx(m1(axis[i])).epsilon(1e-9).scale(0));

    const auto s = probe_alone_spectrum(m, 0, kPulses.probe, kModelGrid);
    CHECK(s.mass() == doctest::Approx(1.0).epsilon(1e-4).scale(0));
    const auto k = convolution_kernel(kPulses.probe, kModelGrid.step);
    std::vector<double> offs(k.size());
    for (std::size_t i = 0; i < k.size(); ++i)
        offs[i] = (static_cast<double>(i) - static_cast<double>(k.size() - 1) / 2) * kModelGrid.step;
    // Skew-normal variance Omega00 - (2/pi) delta0^2 plus the kernel variance.
    const auto d = oracle::delta(oracle::covariance(p.sigma_khz, p.rho), {p.alpha[0], p.alpha[1], p.alpha[2]});
    const double var = 0.77 * 0.77 - 2.0 / std::numbers::pi * d[0] * d[0] + second_moment(offs, k);
    CHECK(second_moment(s.freq_khz, s.values) == doctest::Approx(var).epsilon(1e-3).scale(0));
}

TEST_CASE("hole burned at 6.45 kHz sits near the pump frequency") {
    const SkewNormal m(averaged_params());
    const auto h = hole_spectrum(m, 6.45, 2.0, kPulses);
    CHECK_FALSE(h.empty);
    const auto fit = fit_gaussian(h.profile.freq_khz, h.profile.values);
    CHECK(std::abs(fit.center - 6.45) < 0.15);
    CHECK(*std::max_element(h.profile.values.begin(), h.profile.values.end()) == doctest::Approx(1.0).scale(0));
}

TEST_CASE("hole outside the support is flagged empty") {
    const SkewNormal m(averaged_params());
    const auto h = hole_spectrum(m, 20.0, 2.0, kPulses);
    CHECK(h.empty);
    for (double v : h.profile.values) CHECK(v == 0.0);
}

TEST_CASE("perfect memory: hole width equals the instrumental width") {
    auto p = averaged_params();
    p.rho = {0.9999, 0.9999, 0.9999};
    p.sigma_khz = {0.8, 0.8, 0.8};
    p.alpha = {0, 0, 0};
    const SkewNormal m(p);
    const auto c = hole_width_curve(m, 6.0, kPulses);
    for (const auto& pt : c.points) CHECK(pt.width_hz == doctest::Approx(c.instrumental_hz).epsilon(0.03).scale(0));
}

TEST_CASE("hole width grows with delay toward the inhomogeneous width") {
    const SkewNormal m(averaged_params());
    const auto c = hole_width_curve(m, 6.45, kPulses);
    REQUIRE(c.points.size() == 3);
    CHECK(c.points[0].width_hz > c.instrumental_hz);
    CHECK(c.points[1].width_hz > c.points[0].width_hz);
    CHECK(c.points[2].width_hz > c.points[1].width_hz);
    CHECK(c.points[2].width_hz < c.inhomogeneous_hz);
    for (const auto& pt : c.points) CHECK(pt.fit_ok);
}

TEST_CASE("hole widths are stable under grid refinement") {
    const SkewNormal m(averaged_params());
    const auto coarse = hole_width_curve(m, 6.45, kPulses, kModelGrid);
    const auto fine = hole_width_curve(m, 6.45, kPulses, GridSpec{3.0, 10.0, 0.025});
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(fine.points[i].width_hz == doctest::Approx(coarse.points[i].width_hz).epsilon(0.01).scale(0));
    CHECK(fine.inhomogeneous_hz == doctest::Approx(coarse.inhomogeneous_hz).epsilon(0.01).scale(0));
}

TEST_CASE("noise-free synthesis equals the convolved marginals") {
    const auto truth = averaged_params();
    const auto d = synth_dataset(truth, kPulses, kDatasetGrid, 0.0, 1);
    const SkewNormal m(truth);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto g = convolved_marginal(m, pair_for_delay(kDelaysMs[k]), kPulses, kDatasetGrid, kDatasetGrid);
        CHECK(d.grids[k].values == g.values);
        CHECK(d.grids[k].delay_ms == kDelaysMs[k]);
    }
    CHECK(d.truth.has_value());
    CHECK_NOTHROW(d.validate());
}

TEST_CASE("synthesis is deterministic by seed") {
    const auto truth = averaged_params();
    const auto a = synth_dataset(truth, kPulses, kDatasetGrid, 0.05, 9);
    const auto b = synth_dataset(truth, kPulses, kDatasetGrid, 0.05, 9);
    const auto c = synth_dataset(truth, kPulses, kDatasetGrid, 0.05, 10);
    CHECK(a.grids[1].values == b.grids[1].values);
    CHECK(a.probe_alone[2].values == b.probe_alone[2].values);
    CHECK(a.grids[1].values != c.grids[1].values);
}

TEST_CASE("noisy dataset: truth SSR sits at the chi-square noise floor") {
    const auto truth = averaged_params();
    const double noise = 0.05;
    const auto clean = synth_dataset(truth, kPulses, kDatasetGrid, 0.0, 4);
    const auto noisy = synth_dataset(truth, kPulses, kDatasetGrid, noise, 4);
    double expected = 0.0, variance = 0.0;
    auto add = [&](const std::vector<double>& v) {
        const double sd = noise * *std::max_element(v.begin(), v.end());
        expected += static_cast<double>(v.size()) * sd * sd;
        variance += 2.0 * static_cast<double>(v.size()) * std::pow(sd, 4);
    };
    for (const auto& g : clean.grids) add(g.values);
    for (const auto& p : clean.probe_alone) add(p.values);
    const double ssr = residual_ssr(truth, {1, 1, 1, 1}, noisy);
    CHECK(std::abs(ssr - expected) < 3.0 * std::sqrt(variance));
}

TEST_CASE("closed-form surfaces agree with the quadrature path") {
    const auto truth = averaged_params();
    const auto d = synth_dataset(truth, kPulses, kDatasetGrid, 0.0, 1);
    const SurfaceModel model(d);
    SurfaceModel::Surfaces s;
    REQUIRE(model.evaluate(truth, s));
    for (std::size_t k = 0; k < 3; ++k) {
        double peak = 0;
        for (double v : d.grids[k].values) peak = std::max(peak, v);
        for (std::size_t i = 0; i < s.grids[k].size(); ++i)
            CHECK(std::abs(s.grids[k][i] - d.grids[k].values[i]) <= 1e-8 * peak);
        for (std::size_t i = 0; i < s.probe_alone[k].size(); ++i)
            CHECK(s.probe_alone[k][i] == doctest::Approx(d.probe_alone[k].values[i]).epsilon(1e-8).scale(0));
    }
}

TEST_CASE("dataset validation catches inconsistent layouts") {
    auto d = synth_dataset(averaged_params(), kPulses, kDatasetGrid, 0.0, 1);
    d.grids[1].delay_ms = 4.0;
    CHECK_THROWS_AS(d.validate(), ValidationError);
}
