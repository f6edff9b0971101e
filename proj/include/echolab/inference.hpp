#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "echolab/forward.hpp"
#include "echolab/skew_normal.hpp"

namespace echolab {

/// Per-grid scale factors: 2, 3 and 5 ms grids, then one shared by the probe-alone spectra.
using ScaleFactors = std::array<double, 4>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Interval&) const = default;
};

struct FitBounds {
    Interval mu{4.0, 8.0};
    Interval sigma{0.2, 2.0};
    Interval rho{-0.999, 0.999};
    Interval alpha{-10.0, 10.0};
    Interval scale{0.1, 10.0};
    bool operator==(const FitBounds&) const = default;
};

struct FitConfig {
    int population = 120;
    int generations = 300;
    double crossover_rate = 0.8;
    double mutation_rate = 0.08;
    /// Gaussian mutation s.d. as a fraction of each gene's range.
    double mutation_scale = 0.05;
    /// Fraction of the initial mutation s.d. removed by the last generation (linear).
    double mutation_shrink = 1.0;
    double elite_fraction = 0.05;
    int tournament_size = 3;
    FitBounds bounds;
    std::uint64_t seed = 1;
    /// Refine the best GA individual with Levenberg-Marquardt; kept only if it stays
    /// inside the bounds with a valid covariance and lowers the SSR.
    bool polish = true;
    /// Worker threads for fitness evaluation; results do not depend on this.
    int threads = 1;

    /// Throws ValidationError for unordered bounds, rates outside [0, 1] or population < 10.
    void validate() const;
    bool operator==(const FitConfig&) const = default;
};

struct FitResult {
    SkewNormalParams params;
    ScaleFactors scales{1.0, 1.0, 1.0, 1.0};
    double ssr = 0.0;
    double ga_ssr = 0.0;   ///< best SSR before polishing
    bool polished = false;
    std::vector<double> history;  ///< best SSR after each generation
    bool covariance_valid = false;
    std::uint64_t seed = 0;
    long evaluations = 0;
    long rejected = 0;  ///< candidates dropped for a non-positive-definite covariance
};

/// Sum of squared residuals of the scaled model surfaces against the dataset. Invalid
/// parameters give +infinity.
double residual_ssr(const SkewNormalParams& params, const ScaleFactors& scales, const Dataset& dataset);

/// Same as above with a prebuilt surface model (avoids recomputing kernels).
double residual_ssr(const SurfaceModel& model, const SkewNormalParams& params, const ScaleFactors& scales,
                    const Dataset& dataset);

/// Bounded, seeded genetic-algorithm minimization of residual_ssr.
FitResult ga_fit(const Dataset& dataset, const FitConfig& config);

struct ParamStats {
    SkewNormalParams mean;
    SkewNormalParams stddev;  ///< sample standard deviation across runs (node_times unused)
    ScaleFactors scale_mean{};
    ScaleFactors scale_stddev{};
};

struct MultiFitResult {
    std::vector<FitResult> runs;
    std::vector<std::uint64_t> failed_seeds;
    ParamStats stats;
};

/// Independent ga_fit runs with seeds base_seed + i, i = 0..runs-1.
MultiFitResult multi_fit(const Dataset& dataset, const FitConfig& config, int runs = 12);

/// Independent ga_fit runs with explicit seeds (at least two).
MultiFitResult multi_fit(const Dataset& dataset, const FitConfig& config, std::span<const std::uint64_t> seeds);

/// Mean and sample standard deviation of the fitted parameters.
ParamStats summarize(std::span<const FitResult> runs);

}  // namespace echolab
