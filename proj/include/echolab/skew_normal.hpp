#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "echolab/grid.hpp"

namespace echolab {

/// Parameters of the trivariate skew-normal over frequencies (w0, w2, w5) at three node times.
///
/// rho holds the mutual correlations in the order (rho02, rho25, rho05).
struct SkewNormalParams {
    std::array<double, 3> mu_khz{};
    std::array<double, 3> sigma_khz{1.0, 1.0, 1.0};
    std::array<double, 3> rho{};
    std::array<double, 3> alpha{};
    std::array<double, 3> node_times_ms{0.0, 2.0, 5.0};

    bool operator==(const SkewNormalParams&) const = default;
};

/// Averaged fit reported for the 24 E_R lattice.
SkewNormalParams averaged_params();

/// Frequencies (kHz) at the three node times.
struct FrequencyTriple {
    double w0 = 0.0;
    double w2 = 0.0;
    double w5 = 0.0;

    double operator[](std::size_t i) const { return i == 0 ? w0 : (i == 1 ? w2 : w5); }
    double& operator[](std::size_t i) { return i == 0 ? w0 : (i == 1 ? w2 : w5); }
    Eigen::Vector3d vec() const { return {w0, w2, w5}; }
    bool operator==(const FrequencyTriple&) const = default;
};

/// Pair of node indices (0, 1, 2 for the three node times), first < second.
using NodePair = std::pair<int, int>;

/// Covariance built from sigma and rho; no validation.
Eigen::Matrix3d covariance(const SkewNormalParams& p);

/// True when sigma > 0, |rho| < 1 and the covariance admits a Cholesky factor.
bool is_valid(const SkewNormalParams& p);

/// Standard normal CDF.
double normal_cdf(double x);

/// A validated skew-normal model with precomputed factorizations. Immutable.
class SkewNormal {
public:
    /// Throws ValidationError when the parameters violate the invariants.
    explicit SkewNormal(const SkewNormalParams& p);

    const SkewNormalParams& params() const { return p_; }
    const Eigen::Vector3d& mean_vector() const { return mu_; }
    const Eigen::Vector3d& alpha_vector() const { return alpha_; }
    const Eigen::Matrix3d& covariance() const { return omega_; }
    /// Lower Cholesky factor of the covariance.
    const Eigen::Matrix3d& cholesky() const { return chol_; }
    /// delta = Omega alpha / sqrt(1 + alpha' Omega alpha)
    const Eigen::Vector3d& delta() const { return delta_; }

    double density(const FrequencyTriple& w) const;
    double density(const Eigen::Vector3d& w) const;

    /// Exact first and second moments of the distribution.
    Eigen::Vector3d mean() const;
    Eigen::Matrix3d moment_covariance() const;

private:
    SkewNormalParams p_;
    Eigen::Vector3d mu_, alpha_, delta_;
    Eigen::Matrix3d omega_, omega_inv_, chol_;
    double log_norm_ = 0.0;
};

/// Density (kHz^-3); throws ValidationError for invalid parameters.
double sn_density(const SkewNormalParams& params, const FrequencyTriple& w);

struct MarginalOptions {
    /// Integration half-width in conditional standard deviations.
    double half_width = 8.0;
    std::size_t order = 20;
    double rel_tol = 1e-8;
};

/// Bivariate marginal M(w_a, w_b) obtained by integrating out the third node by quadrature.
class BivariateMarginal {
public:
    BivariateMarginal(const SkewNormal& model, NodePair keep, MarginalOptions opt = {});

    NodePair keep() const { return keep_; }
    int dropped() const { return drop_; }
    /// Throws ConvergenceError carrying the estimate when quadrature stalls.
    double operator()(double wa, double wb) const;
    SpectrumGrid2D evaluate(const std::vector<double>& axis_a, const std::vector<double>& axis_b) const;

private:
    SkewNormal model_;
    NodePair keep_;
    int drop_;
    MarginalOptions opt_;
    Eigen::Matrix2d inv2_;
    double log_norm2_;
    Eigen::RowVector2d beta_;
    double cond_sd_;
};

/// Univariate marginal of one node, integrating the other two out by nested quadrature.
class UnivariateMarginal {
public:
    UnivariateMarginal(const SkewNormal& model, int keep, MarginalOptions opt = {});

    int keep() const { return keep_; }
    double operator()(double w) const;
    std::vector<double> evaluate(const std::vector<double>& axis) const;

private:
    BivariateMarginal pair_;
    int keep_;
    int outer_;
    MarginalOptions opt_;
    double outer_slope_ = 0.0;
    double outer_sd_ = 0.0;
    double mu_keep_ = 0.0;
    double mu_outer_ = 0.0;
};

BivariateMarginal sn_marginal_2d(const SkewNormal& model, NodePair keep, MarginalOptions opt = {});
UnivariateMarginal sn_marginal_1d(const SkewNormal& model, int keep, MarginalOptions opt = {});

/// Shape of the closed-form univariate marginal of node `keep`: the marginal density is
/// 2 phi(y; Omega_kk) Phi(a* y) with y = w - mu_k.
double marginal_alpha(const Eigen::Matrix3d& omega, const Eigen::Vector3d& alpha, int keep);

/// Draws n triples; deterministic for a given seed.
std::vector<FrequencyTriple> sn_sample(const SkewNormal& model, std::size_t n, std::uint64_t seed);

/// Density of the increments (w2 - w0, w5 - w2) with its moments.
struct IncrementProjection {
    SpectrumGrid2D density;  ///< pump axis: w2 - w0, probe axis: w5 - w2
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov;
    double correlation = 0.0;
};

/// Evaluates the increment density on the given axes by quadrature along the null
/// direction (1,1,1); moments are obtained by quadrature of the same density.
IncrementProjection increment_projection(const SkewNormal& model, const GridSpec& first, const GridSpec& second);

/// Density of the increments at a point, integrating along the null direction.
double increment_density(const SkewNormal& model, double d1, double d2);

/// Grid spec covering +-4 standard deviations of each increment with `points` nodes.
std::pair<GridSpec, GridSpec> default_increment_grids(const SkewNormal& model, std::size_t points = 81);

}  // namespace echolab
