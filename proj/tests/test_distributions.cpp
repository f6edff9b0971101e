#include "doctest.h"

#include <cmath>
#include <numbers>

#include "echolab/errors.hpp"
#include "echolab/skew_normal.hpp"
#include "oracles.hpp"

using namespace echolab;

namespace {

oracle::Mat3 cov_of(const SkewNormalParams& p) { return oracle::covariance(p.sigma_khz, p.rho); }

oracle::Vec3 arr(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

SkewNormalParams gaussian_params() {
    SkewNormalParams p = averaged_params();
    p.alpha = {0.0, 0.0, 0.0};
    return p;
}

}  // namespace

TEST_CASE("zero shape reduces the density to the trivariate normal") {
    const auto p = gaussian_params();
    const SkewNormal m(p);
    for (const FrequencyTriple w : {FrequencyTriple{5.0, 6.1, 6.7}, FrequencyTriple{6.6, 5.5, 4.9},
                                    FrequencyTriple{5.92, 5.92, 5.96}}) {
        const oracle::Vec3 y{w.w0 - p.mu_khz[0], w.w2 - p.mu_khz[1], w.w5 - p.mu_khz[2]};
        CHECK(m.density(w) == doctest::Approx(oracle::mvn3(cov_of(p), y)).epsilon(1e-12).scale(0));
    }
}

TEST_CASE("density at the mean is psi(0) for any shape") {
    const auto p = averaged_params();
    const double expected = 1.0 / std::sqrt(std::pow(2.0 * std::numbers::pi, 3) * oracle::det(cov_of(p)));
    CHECK(sn_density(p, {5.92, 5.92, 5.96}) == doctest::Approx(expected).epsilon(1e-12).scale(0));
}

TEST_CASE("averaged parameters: density matches the reference formula pointwise") {
    const auto p = averaged_params();
    const SkewNormal m(p);
    for (const FrequencyTriple w : {FrequencyTriple{5.0, 6.1, 6.7}, FrequencyTriple{6.6, 6.5, 6.4},
                                    FrequencyTriple{5.2, 5.1, 5.4}}) {
        const double ref = oracle::skew_normal3(arr(p.mu_khz), cov_of(p), arr(p.alpha), {w.w0, w.w2, w.w5});
        CHECK(m.density(w) == doctest::Approx(ref).epsilon(1e-11).scale(0));
        CHECK(m.density(w) >= 0.0);
    }
}

TEST_CASE("averaged parameters: density integrates to one over a 6-sigma box") {
    const auto p = averaged_params();
    const SkewNormal m(p);
    const auto& mu = p.mu_khz;
    const auto& s = p.sigma_khz;
    auto box = [&](int k) { return std::pair{mu[k] - 6 * s[k], mu[k] + 6 * s[k]}; };
    const auto [a0, b0] = box(0);
    const auto [a1, b1] = box(1);
    const auto [a2, b2] = box(2);
    const double total = oracle::integrate(
        [&](double x) {
            return oracle::integrate(
                [&](double y) {
                    return oracle::integrate([&](double z) { return m.density(FrequencyTriple{x, y, z}); }, a2, b2, 6);
                },
                a1, b1, 6);
        },
        a0, b0, 6);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-4).scale(0));
}

TEST_CASE("invalid parameters are rejected") {
    auto p = averaged_params();
    p.rho = {0.99, 0.99, -0.99};
    CHECK_FALSE(is_valid(p));
    CHECK_THROWS_AS(SkewNormal{p}, ValidationError);
    p = averaged_params();
    p.sigma_khz[1] = 0.0;
    CHECK_THROWS_AS(sn_density(p, {6, 6, 6}), ValidationError);
    p = averaged_params();
    p.rho[0] = 1.0;
    CHECK_FALSE(is_valid(p));
}

TEST_CASE("density is invariant under a joint translation") {
    auto p = averaged_params();
    const double before = sn_density(p, {5.5, 6.2, 6.9});
    for (double& m : p.mu_khz) m += 1.37;
    CHECK(sn_density(p, {5.5 + 1.37, 6.2 + 1.37, 6.9 + 1.37}) == doctest::Approx(before).epsilon(1e-12).scale(0));
}

TEST_CASE("bivariate marginal with zero shape is the bivariate normal") {
    const auto p = gaussian_params();
    const SkewNormal m(p);
    const auto marg = sn_marginal_2d(m, {0, 2});
    const double s0 = p.sigma_khz[0], s5 = p.sigma_khz[2];
    for (double a : {5.1, 5.9, 6.6})
        for (double b : {5.0, 6.0, 7.0})
            CHECK(marg(a, b) == doctest::Approx(oracle::bvn(s0, s5, p.rho[2], a - 5.92, b - 5.96)).epsilon(1e-9).scale(0));
}

TEST_CASE("averaged parameters: bivariate marginals match dense quadrature on a 64x64 grid") {
    const auto p = averaged_params();
    const SkewNormal m(p);
    const auto cov = cov_of(p);
    for (NodePair keep : {NodePair{0, 1}, NodePair{1, 2}, NodePair{0, 2}}) {
        const int drop = 3 - keep.first - keep.second;
        const auto marg = sn_marginal_2d(m, keep);
        double worst = 0.0;
        for (int i = 0; i < 64; ++i) {
            for (int j = 0; j < 64; ++j) {
                const double a = p.mu_khz[keep.first] + p.sigma_khz[keep.first] * (-3.0 + 6.0 * i / 63.0);
                const double b = p.mu_khz[keep.second] + p.sigma_khz[keep.second] * (-3.0 + 6.0 * j / 63.0);
                const double lo = p.mu_khz[drop] - 12 * p.sigma_khz[drop];
                const double hi = p.mu_khz[drop] + 12 * p.sigma_khz[drop];
                const double ref = oracle::integrate(
                    [&](double x) {
                        oracle::Vec3 w{};
                        w[keep.first] = a;
                        w[keep.second] = b;
                        w[drop] = x;
                        return oracle::skew_normal3(arr(p.mu_khz), cov, arr(p.alpha), w);
                    },
                    lo, hi, 64);
                if (ref > 0.0) worst = std::max(worst, std::abs(marg(a, b) / ref - 1.0));
            }
        }
        CAPTURE(keep.first);
        CAPTURE(keep.second);
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("marginals integrate to one") {
    const auto p = averaged_params();
    const SkewNormal m(p);
    const auto marg = sn_marginal_2d(m, {0, 1});
    const double mass2 = oracle::integrate(
        [&](double a) { return oracle::integrate([&](double b) { return marg(a, b); }, 5.92 - 8 * 0.82, 5.92 + 8 * 0.82, 8); },
        5.92 - 8 * 0.77, 5.92 + 8 * 0.77, 8);
    CHECK(mass2 == doctest::Approx(1.0).epsilon(1e-4).scale(0));
    for (int k = 0; k < 3; ++k) {
        const auto m1 = sn_marginal_1d(m, k);
        const double mass = oracle::integrate(m1, p.mu_khz[k] - 8 * p.sigma_khz[k], p.mu_khz[k] + 8 * p.sigma_khz[k], 16);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-4).scale(0));
    }
}

TEST_CASE("univariate marginal with zero shape is normal") {
    const SkewNormal m(gaussian_params());
    const auto m1 = sn_marginal_1d(m, 2);
    for (double w : {4.5, 5.96, 6.8})
        CHECK(m1(w) == doctest::Approx(oracle::normal_pdf(w - 5.96, 0.83)).epsilon(1e-9).scale(0));
}

TEST_CASE("averaged parameters: node-0 marginal mean exceeds mu and matches the moment oracle") {
    const auto p = averaged_params();
    const SkewNormal m(p);
    const auto m1 = sn_marginal_1d(m, 0);
    const double lo = 5.92 - 8 * 0.77, hi = 5.92 + 8 * 0.77;
    const double mean = oracle::integrate([&](double w) { return w * m1(w); }, lo, hi, 16);
    // Closed-form skew-normal mean: mu + sqrt(2/pi) delta.
    const auto d = oracle::delta(cov_of(p), arr(p.alpha));
    CHECK(mean > p.mu_khz[0]);
    CHECK(mean == doctest::Approx(5.92 + std::sqrt(2.0 / std::numbers::pi) * d[0]).epsilon(1e-8).scale(0));
}

TEST_CASE("marginalization commutes") {
    const SkewNormal m(averaged_params());
    const auto m2 = sn_marginal_2d(m, {0, 1});
    const auto m1 = sn_marginal_1d(m, 0);
    for (double w0 : {5.3, 6.0, 6.7}) {
        const double via2 = oracle::integrate([&](double w2) { return m2(w0, w2); }, 5.92 - 8 * 0.82, 5.92 + 8 * 0.82, 16);
        CHECK(via2 == doctest::Approx(m1(w0)).epsilon(1e-7).scale(0));
    }
}

TEST_CASE("closed-form marginal shape agrees with quadrature") {
    const auto p = averaged_params();
    const SkewNormal m(p);
    for (int k = 0; k < 3; ++k) {
        const double a = marginal_alpha(m.covariance(), m.alpha_vector(), k);
        const auto m1 = sn_marginal_1d(m, k);
        for (double off : {-0.8, 0.0, 0.6}) {
            const double sd = p.sigma_khz[k];
            const double closed = 2.0 * oracle::normal_pdf(off, sd) * oracle::phi_cdf(a * off);
            CHECK(m1(p.mu_khz[k] + off) == doctest::Approx(closed).epsilon(1e-8).scale(0));
        }
    }
}

TEST_CASE("sampling: Gaussian case reproduces the covariance") {
    const auto p = gaussian_params();
    const SkewNormal m(p);
    const std::size_t n = 1'000'000;
    const auto s = sn_sample(m, n, 11);
    const auto cov = cov_of(p);
    double mean[3] = {0, 0, 0};
    for (const auto& t : s)
        for (int k = 0; k < 3; ++k) mean[k] += t[k] / n;
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
            double c = 0.0;
            for (const auto& t : s) c += (t[a] - mean[a]) * (t[b] - mean[b]);
            c /= static_cast<double>(n - 1);
            // Standard error of a sample covariance under normality.
            const double se = std::sqrt((cov[a][b] * cov[a][b] + cov[a][a] * cov[b][b]) / n);
            CHECK(std::abs(c - cov[a][b]) < 3 * se);
        }
}

TEST_CASE("sampling: node-0 mean matches the quadrature mean") {
    const auto p = averaged_params();
    const SkewNormal m(p);
    const std::size_t n = 1'000'000;
    const auto s = sn_sample(m, n, 5);
    double sum = 0, sum2 = 0;
    for (const auto& t : s) {
        sum += t.w0;
        sum2 += t.w0 * t.w0;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    const auto m1 = sn_marginal_1d(m, 0);
    const double ref = oracle::integrate([&](double w) { return w * m1(w); }, 5.92 - 8 * 0.77, 5.92 + 8 * 0.77, 16);
    CHECK(std::abs(mean - ref) < 3 * se);
}

TEST_CASE("sampling is deterministic by seed") {
    const SkewNormal m(averaged_params());
    const auto a = sn_sample(m, 1, 99);
    const auto b = sn_sample(m, 1, 99);
    CHECK(a[0].w0 == b[0].w0);
    CHECK(a[0].w2 == b[0].w2);
    CHECK(a[0].w5 == b[0].w5);
    const auto c = sn_sample(m, 1, 100);
    CHECK(c[0].w0 != a[0].w0);
}

TEST_CASE("increment projection: Gaussian case has the analytic covariance") {
    const auto p = gaussian_params();
    const SkewNormal m(p);
    const auto [g1, g2] = default_increment_grids(m, 41);
    const auto inc = increment_projection(m, g1, g2);
    const double s0 = p.sigma_khz[0], s2 = p.sigma_khz[1], s5 = p.sigma_khz[2];
    const double r02 = p.rho[0], r25 = p.rho[1], r05 = p.rho[2];
    const double v1 = s0 * s0 + s2 * s2 - 2 * r02 * s0 * s2;
    const double v2 = s2 * s2 + s5 * s5 - 2 * r25 * s2 * s5;
    const double c12 = s0 * s2 * r02 + s2 * s5 * r25 - s2 * s2 - s0 * s5 * r05;
    CHECK(inc.cov(0, 0) == doctest::Approx(v1).epsilon(1e-10).scale(0));
    CHECK(inc.cov(1, 1) == doctest::Approx(v2).epsilon(1e-10).scale(0));
    CHECK(inc.cov(0, 1) == doctest::Approx(c12).epsilon(1e-10).scale(0));
    CHECK(std::abs(inc.mean[0]) < 1e-10);
    // Pointwise density: bivariate normal of the increments.
    const double r = c12 / std::sqrt(v1 * v2);
    CHECK(increment_density(m, 0.3, -0.2) ==
          doctest::Approx(oracle::bvn(std::sqrt(v1), std::sqrt(v2), r, 0.3, -0.2 - 0.04)).epsilon(1e-9).scale(0));
}

TEST_CASE("averaged parameters: increments are negatively correlated, matching Monte Carlo") {
    const SkewNormal m(averaged_params());
    const auto [g1, g2] = default_increment_grids(m, 41);
    const auto inc = increment_projection(m, g1, g2);
    CHECK(inc.correlation < 0.0);
    const auto s = sn_sample(m, 1'000'000, 3);
    double a = 0, b = 0, aa = 0, bb = 0, ab = 0;
    for (const auto& t : s) {
        const double d1 = t.w2 - t.w0, d2 = t.w5 - t.w2;
        a += d1;
        b += d2;
        aa += d1 * d1;
        bb += d2 * d2;
        ab += d1 * d2;
    }
    const double n = static_cast<double>(s.size());
    const double corr = (ab / n - a / n * b / n) / std::sqrt((aa / n - a * a / n / n) * (bb / n - b * b / n / n));
    CHECK(std::abs(inc.correlation - corr) < 0.02);
    CHECK(inc.density.mass() == doctest::Approx(1.0).epsilon(1e-3).scale(0));
}
