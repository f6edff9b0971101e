#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "echolab/errors.hpp"
#include "echolab/inference.hpp"

using namespace echolab;

namespace {

const PulsePair kPulses{};

FitConfig small_config(std::uint64_t seed) {
    FitConfig c;
    c.population = 40;
    c.generations = 40;
    c.seed = seed;
    return c;
}

double sample_sd(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("truth parameters give zero SSR on noise-free data") {
    const auto truth = averaged_params();
    const auto d = synth_dataset(truth, kPulses, kDatasetGrid, 0.0, 1);
    CHECK(residual_ssr(truth, {1, 1, 1, 1}, d) < 1e-12);
}

TEST_CASE("shifting mu raises the SSR") {
    const auto truth = averaged_params();
    const auto d = synth_dataset(truth, kPulses, kDatasetGrid, 0.0, 1);
    for (int k = 0; k < 3; ++k) {
        auto p = truth;
        p.mu_khz[k] += 0.2;
        CHECK(residual_ssr(p, {1, 1, 1, 1}, d) > 1e-4);
    }
    CHECK(residual_ssr(truth, {1.1, 1, 1, 1}, d) > 0.0);
}

TEST_CASE("invalid covariance gives an infinite SSR instead of throwing") {
    const auto d = synth_dataset(averaged_params(), kPulses, kDatasetGrid, 0.0, 1);
    auto p = averaged_params();
    p.rho = {0.99, -0.99, 0.99};
    CHECK(residual_ssr(p, {1, 1, 1, 1}, d) == std::numeric_limits<double>::infinity());
    p = averaged_params();
    p.sigma_khz[1] = -0.1;
    CHECK(residual_ssr(p, {1, 1, 1, 1}, d) == std::numeric_limits<double>::infinity());
}

TEST_CASE("SSR is the plain sum over both surface paths") {
    auto truth = averaged_params();
    const auto d = synth_dataset(truth, kPulses, kDatasetGrid, 0.03, 5);
    const SurfaceModel model(d);
    truth.mu_khz[0] += 0.05;
    CHECK(residual_ssr(model, truth, {0.9, 1, 1.1, 1}, d) ==
          doctest::Approx(residual_ssr(truth, {0.9, 1, 1.1, 1}, d)).epsilon(1e-12).scale(0));

    // Reference: direct sum of squared residuals against the quadrature surfaces.
    const SkewNormal m(truth);
    const ScaleFactors sc{0.9, 1, 1.1, 1};
    double ref = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto g = convolved_marginal(m, pair_for_delay(kDelaysMs[k]), kPulses, kDatasetGrid, kDatasetGrid);
        for (std::size_t i = 0; i < g.values.size(); ++i) ref += std::pow(d.grids[k].values[i] - sc[k] * g.values[i], 2);
        const auto p = probe_alone_spectrum(m, static_cast<int>(k), kPulses.probe, kDatasetGrid);
        for (std::size_t i = 0; i < p.values.size(); ++i)
            ref += std::pow(d.probe_alone[k].values[i] - sc[3] * p.values[i], 2);
    }
    CHECK(residual_ssr(truth, sc, d) == doctest::Approx(ref).epsilon(1e-7).scale(0));
}

TEST_CASE("GA is deterministic, elitist and independent of thread count") {
    const auto d = synth_dataset(averaged_params(), kPulses, kDatasetGrid, 0.0, 1);
    auto cfg = small_config(3);
    cfg.generations = 15;
    cfg.polish = false;
    const auto a = ga_fit(d, cfg);
    const auto b = ga_fit(d, cfg);
    CHECK(a.ssr == b.ssr);
    CHECK(a.params == b.params);
    CHECK(a.history == b.history);
    REQUIRE(a.history.size() == 15);
    for (std::size_t i = 1; i < a.history.size(); ++i) CHECK(a.history[i] <= a.history[i - 1]);
    CHECK(a.covariance_valid);
    CHECK(a.ssr >= 0.0);
    cfg.threads = 3;
    const auto c = ga_fit(d, cfg);
    CHECK(c.params == a.params);
    CHECK(c.history == a.history);
}

TEST_CASE("fitted parameters respect the bounds") {
    const auto d = synth_dataset(averaged_params(), kPulses, kDatasetGrid, 0.05, 2);
    const auto cfg = small_config(8);
    const auto r = ga_fit(d, cfg);
    for (int k = 0; k < 3; ++k) {
        CHECK(r.params.mu_khz[k] >= cfg.bounds.mu.lo);
        CHECK(r.params.mu_khz[k] <= cfg.bounds.mu.hi);
        CHECK(r.params.sigma_khz[k] >= cfg.bounds.sigma.lo);
        CHECK(r.params.sigma_khz[k] <= cfg.bounds.sigma.hi);
        CHECK(std::abs(r.params.rho[k]) <= 0.999);
        CHECK(std::abs(r.params.alpha[k]) <= 10.0);
    }
    for (double s : r.scales) CHECK((s >= 0.1 && s <= 10.0));
    CHECK(r.covariance_valid);
    CHECK(r.ssr <= r.ga_ssr);
}

TEST_CASE("infeasible rho bounds raise an initialization error") {
    const auto d = synth_dataset(averaged_params(), kPulses, kDatasetGrid, 0.0, 1);
    auto cfg = small_config(1);
    cfg.bounds.rho = {-0.999, -0.99};
    CHECK_THROWS_AS(ga_fit(d, cfg), ValidationError);
}

TEST_CASE("fit config validation") {
    FitConfig c;
    CHECK_NOTHROW(c.validate());
    c.population = 5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = FitConfig{};
    c.crossover_rate = 1.5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = FitConfig{};
    c.bounds.mu = {8.0, 4.0};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = FitConfig{};
    c.bounds.rho = {-1.0, 0.5};
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("multi_fit with identical seeds has zero spread") {
    const auto d = synth_dataset(averaged_params(), kPulses, kDatasetGrid, 0.0, 1);
    auto cfg = small_config(4);
    cfg.generations = 10;
    cfg.polish = false;
    const std::vector<std::uint64_t> seeds{4, 4};
    const auto r = multi_fit(d, cfg, seeds);
    REQUIRE(r.runs.size() == 2);
    for (int k = 0; k < 3; ++k) {
        CHECK(r.stats.stddev.mu_khz[k] == 0.0);
        CHECK(r.stats.stddev.rho[k] == 0.0);
        CHECK(r.stats.stddev.alpha[k] == 0.0);
    }
    CHECK(r.stats.mean.mu_khz == r.runs[0].params.mu_khz);
    CHECK_THROWS_AS(multi_fit(d, cfg, 1), ValidationError);
}

TEST_CASE("multi_fit derives seeds from the base seed") {
    const auto d = synth_dataset(averaged_params(), kPulses, kDatasetGrid, 0.0, 1);
    auto cfg = small_config(10);
    cfg.generations = 5;
    cfg.polish = false;
    const auto r = multi_fit(d, cfg, 3);
    REQUIRE(r.runs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(r.runs[i].seed == 10 + i);
    CHECK(r.stats.stddev.mu_khz[0] > 0.0);
}

TEST_CASE("noise-free recovery of the averaged parameters") {
    const auto truth = averaged_params();
    const auto d = synth_dataset(truth, kPulses, kDatasetGrid, 0.0, 1);
    const auto r = multi_fit(d, small_config(20), 2);
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(r.stats.mean.mu_khz[k] - truth.mu_khz[k]) <= 0.05);
        CHECK(std::abs(r.stats.mean.sigma_khz[k] - truth.sigma_khz[k]) <= 0.1 * truth.sigma_khz[k]);
        CHECK(std::abs(r.stats.mean.rho[k] - truth.rho[k]) <= 0.05);
        CHECK(std::abs(r.stats.mean.alpha[k] - truth.alpha[k]) <= 1.0);
    }
    for (double s : r.stats.scale_mean) CHECK(s == doctest::Approx(1.0).epsilon(1e-3).scale(0));
}

TEST_CASE("parameter spread grows with the noise level") {
    const auto truth = averaged_params();
    std::vector<double> spread;
    for (double noise : {0.01, 0.04, 0.12}) {
        std::vector<double> rho25;
        for (std::uint64_t s = 1; s <= 5; ++s) {
            const auto d = synth_dataset(truth, kPulses, kDatasetGrid, noise, 100 + s);
            auto cfg = small_config(s);
            cfg.population = 80;
            cfg.generations = 120;
            rho25.push_back(ga_fit(d, cfg).params.rho[1]);
        }
        spread.push_back(sample_sd(rho25));
        MESSAGE("noise " << noise << " rho25 spread " << spread.back());
    }
    CHECK(spread[0] < spread[1]);
    CHECK(spread[1] < spread[2]);
}
