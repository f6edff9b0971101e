#include "echolab/skew_normal.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "echolab/errors.hpp"
#include "echolab/quadrature.hpp"

namespace echolab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

int third_index(NodePair keep) { return 3 - keep.first - keep.second; }

void check_pair(NodePair keep) {
    const auto [a, b] = keep;
    if (a < 0 || b > 2 || a >= b) throw ValidationError("node pair must be one of (0,1), (1,2), (0,2)");
}

double gauss_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

SkewNormalParams averaged_params() {
    SkewNormalParams p;
    p.mu_khz = {5.92, 5.92, 5.96};
    p.sigma_khz = {0.77, 0.82, 0.83};
    p.rho = {0.88, 0.82, 0.80};
    p.alpha = {2.6, 3.2, 4.0};
    return p;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5); }

Eigen::Matrix3d covariance(const SkewNormalParams& p) {
    const auto& s = p.sigma_khz;
    Eigen::Matrix3d m;
    m(0, 0) = s[0] * s[0];
    m(1, 1) = s[1] * s[1];
    m(2, 2) = s[2] * s[2];
    m(0, 1) = m(1, 0) = s[0] * s[1] * p.rho[0];
    m(1, 2) = m(2, 1) = s[1] * s[2] * p.rho[1];
    m(0, 2) = m(2, 0) = s[0] * s[2] * p.rho[2];
    return m;
}

bool is_valid(const SkewNormalParams& p) {
    for (int i = 0; i < 3; ++i) {
        if (!(p.sigma_khz[i] > 0.0) || !std::isfinite(p.sigma_khz[i])) return false;
        if (!(std::abs(p.rho[i]) < 1.0)) return false;
        if (!std::isfinite(p.mu_khz[i]) || !std::isfinite(p.alpha[i])) return false;
    }
    Eigen::LLT<Eigen::Matrix3d> llt(covariance(p));
    if (llt.info() != Eigen::Success) return false;
    const auto& l = llt.matrixL();
    for (int i = 0; i < 3; ++i)
        if (!(l(i, i) > 1e-12)) return false;
    return true;
}

SkewNormal::SkewNormal(const SkewNormalParams& p) : p_(p) {
    for (int i = 0; i < 3; ++i) {
        if (!(p.sigma_khz[i] > 0.0)) throw ValidationError("sigma must be positive");
        if (!(std::abs(p.rho[i]) < 1.0)) throw ValidationError("correlations must satisfy |rho| < 1");
    }
    if (!is_valid(p)) throw ValidationError("covariance matrix is not positive definite");
    omega_ = echolab::covariance(p);
    Eigen::LLT<Eigen::Matrix3d> llt(omega_);
    chol_ = llt.matrixL();
    omega_inv_ = llt.solve(Eigen::Matrix3d::Identity());
    mu_ = {p.mu_khz[0], p.mu_khz[1], p.mu_khz[2]};
    alpha_ = {p.alpha[0], p.alpha[1], p.alpha[2]};
    const double log_det = 2.0 * chol_.diagonal().array().log().sum();
    log_norm_ = -1.5 * kLog2Pi - 0.5 * log_det;
    delta_ = omega_ * alpha_ / std::sqrt(1.0 + alpha_.dot(omega_ * alpha_));
}

double SkewNormal::density(const Eigen::Vector3d& w) const {
    const Eigen::Vector3d y = w - mu_;
    const double q = y.dot(omega_inv_ * y);
    return 2.0 * std::exp(log_norm_ - 0.5 * q) * normal_cdf(alpha_.dot(y));
}

double SkewNormal::density(const FrequencyTriple& w) const { return density(w.vec()); }

Eigen::Vector3d SkewNormal::mean() const { return mu_ + std::sqrt(2.0 / std::numbers::pi) * delta_; }

Eigen::Matrix3d SkewNormal::moment_covariance() const {
    return omega_ - (2.0 / std::numbers::pi) * delta_ * delta_.transpose();
}

double sn_density(const SkewNormalParams& params, const FrequencyTriple& w) { return SkewNormal(params).density(w); }

// ---------------------------------------------------------------------------
// Bivariate marginal: factor the trivariate normal into psi2(kept) * psi1(dropped | kept)
// and integrate psi1 * Psi(alpha' y) over the dropped coordinate.

BivariateMarginal::BivariateMarginal(const SkewNormal& model, NodePair keep, MarginalOptions opt)
    : model_(model), keep_(keep), drop_(0), opt_(opt) {
    check_pair(keep);
    drop_ = third_index(keep);
    const auto& om = model_.covariance();
    const int a = keep.first, b = keep.second, c = drop_;
    Eigen::Matrix2d o2;
    o2 << om(a, a), om(a, b), om(b, a), om(b, b);
    inv2_ = o2.inverse();
    log_norm2_ = -kLog2Pi - 0.5 * std::log(o2.determinant());
    const Eigen::RowVector2d cab(om(c, a), om(c, b));
    beta_ = cab * inv2_;
    cond_sd_ = std::sqrt(om(c, c) - beta_.dot(cab));
}

double BivariateMarginal::operator()(double wa, double wb) const {
    const auto& mu = model_.mean_vector();
    const auto& al = model_.alpha_vector();
    const int a = keep_.first, b = keep_.second, c = drop_;
    const Eigen::Vector2d y(wa - mu[a], wb - mu[b]);
    const double q = y.dot(inv2_ * y);
    const double psi2 = std::exp(log_norm2_ - 0.5 * q);
    if (psi2 == 0.0) return 0.0;
    const double cond_mean = beta_.dot(y);  // relative to mu[c]
    const double lin = al[a] * y[0] + al[b] * y[1];
    const double sd = cond_sd_;
    auto integrand = [&](double x) { return gauss_pdf(x, cond_mean, sd) * normal_cdf(lin + al[c] * x); };
    quad::PanelOptions po{opt_.order, opt_.rel_tol};
    // Where Psi(lin + alpha_c x) is deep in its lower tail the product peaks near the mode of
    // exp(-(x - m)^2 / 2 sd^2 - (lin + alpha_c x)^2 / 2); the interval covers both centres.
    const double prec = 1.0 / (sd * sd) + al[c] * al[c];
    const double shifted = (cond_mean / (sd * sd) - al[c] * lin) / prec;
    const double lo = std::min(cond_mean, shifted) - opt_.half_width * sd;
    const double hi = std::max(cond_mean, shifted) + opt_.half_width * sd;
    return 2.0 * psi2 * quad::adaptive_panels(integrand, lo, hi, po);
}

SpectrumGrid2D BivariateMarginal::evaluate(const std::vector<double>& axis_a, const std::vector<double>& axis_b) const {
    SpectrumGrid2D g(axis_a, axis_b, 0.0, SpectrumKind::bare_marginal);
    for (std::size_t i = 0; i < axis_a.size(); ++i)
        for (std::size_t j = 0; j < axis_b.size(); ++j) g.at(i, j) = (*this)(axis_a[i], axis_b[j]);
    return g;
}

namespace {

NodePair pair_for(int keep, int outer) { return keep < outer ? NodePair{keep, outer} : NodePair{outer, keep}; }

int outer_index(int keep) { return keep == 0 ? 1 : 0; }

}  // namespace

UnivariateMarginal::UnivariateMarginal(const SkewNormal& model, int keep, MarginalOptions opt)
    : pair_(model, pair_for(keep, outer_index(keep)), opt), keep_(keep), outer_(outer_index(keep)), opt_(opt) {
    if (keep < 0 || keep > 2) throw ValidationError("node index must be 0, 1 or 2");
    const auto& om = model.covariance();
    outer_slope_ = om(outer_, keep_) / om(keep_, keep_);
    outer_sd_ = std::sqrt(om(outer_, outer_) - om(outer_, keep_) * outer_slope_);
    mu_keep_ = model.mean_vector()[keep_];
    mu_outer_ = model.mean_vector()[outer_];
}

double UnivariateMarginal::operator()(double w) const {
    const double centre = mu_outer_ + outer_slope_ * (w - mu_keep_);
    const double lo = centre - opt_.half_width * outer_sd_, hi = centre + opt_.half_width * outer_sd_;
    auto integrand = [&](double x) { return keep_ < outer_ ? pair_(w, x) : pair_(x, w); };
    quad::PanelOptions po{opt_.order, opt_.rel_tol};
    return quad::adaptive_panels(integrand, lo, hi, po);
}

std::vector<double> UnivariateMarginal::evaluate(const std::vector<double>& axis) const {
    std::vector<double> out(axis.size());
    for (std::size_t i = 0; i < axis.size(); ++i) out[i] = (*this)(axis[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Sampling: (X0, X) ~ N(0, [[1, delta'], [delta, Omega]]), keep X when X0 > 0, else -X.

double marginal_alpha(const Eigen::Matrix3d& om, const Eigen::Vector3d& al, int k) {
    if (k < 0 || k > 2) throw ValidationError("node index must be 0, 1 or 2");
    const int o1 = k == 0 ? 1 : 0, o2 = k == 2 ? 1 : 2;
    const double vk = om(k, k);
    const Eigen::Vector2d ok(om(o1, k), om(o2, k));
    Eigen::Matrix2d cond;
    cond << om(o1, o1), om(o1, o2), om(o2, o1), om(o2, o2);
    cond -= ok * ok.transpose() / vk;
    const Eigen::Vector2d ao(al[o1], al[o2]);
    return (al[k] + ok.dot(ao) / vk) / std::sqrt(1.0 + ao.dot(cond * ao));
}

std::vector<FrequencyTriple> sn_sample(const SkewNormal& model, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ValidationError("sample count must be at least 1");
    Eigen::Matrix4d aug = Eigen::Matrix4d::Zero();
    aug(0, 0) = 1.0;
    aug.block<3, 1>(1, 0) = model.delta();
    aug.block<1, 3>(0, 1) = model.delta().transpose();
    aug.block<3, 3>(1, 1) = model.covariance();
    Eigen::LLT<Eigen::Matrix4d> llt(aug);
    if (llt.info() != Eigen::Success) throw ValidationError("augmented covariance is not positive definite");
    const Eigen::Matrix4d l = llt.matrixL();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<FrequencyTriple> out(n);
    const auto& mu = model.mean_vector();
    for (auto& t : out) {
        Eigen::Vector4d z;
        for (int k = 0; k < 4; ++k) z[k] = normal(rng);
        const Eigen::Vector4d x = l * z;
        const double sign = x[0] > 0.0 ? 1.0 : -1.0;
        t.w0 = mu[0] + sign * x[1];
        t.w2 = mu[1] + sign * x[2];
        t.w5 = mu[2] + sign * x[3];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Increment projection (d1, d2) = (w2 - w0, w5 - w2). With s = w0 the map
// (s, d1, d2) -> (w0, w2, w5) has unit Jacobian, so the density of the increments
// is the integral of the trivariate density along s.

namespace {

struct IncrementFactor {
    Eigen::Vector2d mean_d;
    Eigen::Matrix2d cov_d;
    Eigen::Matrix2d inv_d;
    double log_norm_d = 0.0;
    Eigen::RowVector2d beta;
    double cond_sd = 0.0;
    double s_mean = 0.0;
};

IncrementFactor increment_factor(const SkewNormal& model) {
    Eigen::Matrix3d a;
    a << 1, 0, 0, -1, 1, 0, 0, -1, 1;
    const Eigen::Matrix3d sig = a * model.covariance() * a.transpose();
    const Eigen::Vector3d m = a * model.mean_vector();
    IncrementFactor f;
    f.mean_d = m.tail<2>();
    f.cov_d = sig.block<2, 2>(1, 1);
    f.inv_d = f.cov_d.inverse();
    f.log_norm_d = -kLog2Pi - 0.5 * std::log(f.cov_d.determinant());
    const Eigen::RowVector2d c0d = sig.block<1, 2>(0, 1);
    f.beta = c0d * f.inv_d;
    f.cond_sd = std::sqrt(sig(0, 0) - f.beta.dot(c0d));
    f.s_mean = m[0];
    return f;
}

double increment_density_impl(const SkewNormal& model, const IncrementFactor& f, double d1, double d2) {
    const Eigen::Vector2d y = Eigen::Vector2d(d1, d2) - f.mean_d;
    const double psi2 = std::exp(f.log_norm_d - 0.5 * y.dot(f.inv_d * y));
    if (psi2 == 0.0) return 0.0;
    const auto& mu = model.mean_vector();
    const auto& al = model.alpha_vector();
    const double cond_mean = f.s_mean + f.beta.dot(y);
    const double asum = al.sum();
    const double offset = al[1] * d1 + al[2] * (d1 + d2) - al.dot(mu);
    auto integrand = [&](double s) { return gauss_pdf(s, cond_mean, f.cond_sd) * normal_cdf(asum * s + offset); };
    const double lo = cond_mean - 8.0 * f.cond_sd, hi = cond_mean + 8.0 * f.cond_sd;
    return 2.0 * psi2 * quad::adaptive_panels(integrand, lo, hi);
}

}  // namespace

double increment_density(const SkewNormal& model, double d1, double d2) {
    return increment_density_impl(model, increment_factor(model), d1, d2);
}

std::pair<GridSpec, GridSpec> default_increment_grids(const SkewNormal& model, std::size_t points) {
    Eigen::Matrix3d a;
    a << 1, 0, 0, -1, 1, 0, 0, -1, 1;
    const Eigen::Vector3d m = a * model.mean();
    const Eigen::Matrix3d c = a * model.moment_covariance() * a.transpose();
    auto spec = [&](int k) {
        const double sd = std::sqrt(c(k, k));
        const double step = 8.0 * sd / static_cast<double>(points - 1);
        return GridSpec{m[k] - 4.0 * sd, m[k] - 4.0 * sd + step * static_cast<double>(points - 1), step};
    };
    return {spec(1), spec(2)};
}

IncrementProjection increment_projection(const SkewNormal& model, const GridSpec& first, const GridSpec& second) {
    const IncrementFactor f = increment_factor(model);
    IncrementProjection out;
    out.density = SpectrumGrid2D(first.axis(), second.axis(), 0.0, SpectrumKind::increment_density);
    auto& g = out.density;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
            g.at(i, j) = increment_density_impl(model, f, g.pump_khz[i], g.probe_khz[j]);

    // Moments by tensor Gauss-Legendre in the whitened increment coordinates.
    const Eigen::Matrix2d l = Eigen::LLT<Eigen::Matrix2d>(f.cov_d).matrixL();
    const double jac = l.determinant();
    std::vector<double> z, w;
    quad::map_rule(quad::gauss_legendre(64), -8.0, 8.0, z, w);
    double mass = 0.0;
    Eigen::Vector2d first_moment = Eigen::Vector2d::Zero();
    Eigen::Matrix2d second_moment = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = 0; j < z.size(); ++j) {
            const Eigen::Vector2d d = f.mean_d + l * Eigen::Vector2d(z[i], z[j]);
            const double p = increment_density_impl(model, f, d[0], d[1]) * w[i] * w[j] * jac;
            const Eigen::Vector2d dc = d - f.mean_d;
            mass += p;
            first_moment += p * dc;
            second_moment += p * dc * dc.transpose();
        }
    }
    const Eigen::Vector2d centred_mean = first_moment / mass;
    out.mean = f.mean_d + centred_mean;
    out.cov = second_moment / mass - centred_mean * centred_mean.transpose();
    out.correlation = out.cov(0, 1) / std::sqrt(out.cov(0, 0) * out.cov(1, 1));
    return out;
}

BivariateMarginal sn_marginal_2d(const SkewNormal& model, NodePair keep, MarginalOptions opt) {
    return BivariateMarginal(model, keep, opt);
}

UnivariateMarginal sn_marginal_1d(const SkewNormal& model, int keep, MarginalOptions opt) {
    return UnivariateMarginal(model, keep, opt);
}

}  // namespace echolab
