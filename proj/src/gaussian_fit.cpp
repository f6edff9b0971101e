#include "echolab/gaussian_fit.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "echolab/errors.hpp"

namespace echolab {

double second_moment_width(std::span<const double> x, std::span<const double> y) {
    double w = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        w += y[i];
        m1 += y[i] * x[i];
    }
    if (!(w > 0.0)) return 0.0;
    m1 /= w;
    double m2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m2 += y[i] * (x[i] - m1) * (x[i] - m1);
    return std::sqrt(std::max(m2 / w, 0.0));
}

GaussianFit fit_gaussian(std::span<const double> x, std::span<const double> y, double floor_fraction) {
    if (x.size() != y.size() || x.size() < 3) throw ValidationError("gaussian fit needs matching x/y with >= 3 points");
    const auto peak_it = std::max_element(y.begin(), y.end());
    const std::size_t ipk = static_cast<std::size_t>(peak_it - y.begin());
    const double peak = *peak_it;
    const double raw_width = second_moment_width(x, y);
    if (!(peak > 0.0)) throw FitError("gaussian fit: no positive peak", raw_width);

    std::size_t lo = ipk, hi = ipk;
    while (lo > 0 && y[lo - 1] > floor_fraction * peak) --lo;
    while (hi + 1 < y.size() && y[hi + 1] > floor_fraction * peak) ++hi;
    if (hi - lo + 1 < 3) throw FitError("gaussian fit: main lobe spans fewer than 3 points", raw_width);

    const std::span<const double> xs = x.subspan(lo, hi - lo + 1), ys = y.subspan(lo, hi - lo + 1);
    const std::size_t n = xs.size();

    Eigen::Vector3d p(peak, x[ipk], std::max(second_moment_width(xs, ys), 1e-12));
    auto residuals = [&](const Eigen::Vector3d& q, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(static_cast<Eigen::Index>(n));
        if (jac) jac->resize(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = xs[i] - q[1];
            const double e = std::exp(-0.5 * d * d / (q[2] * q[2]));
            const auto k = static_cast<Eigen::Index>(i);
            r[k] = q[0] * e - ys[i];
            if (jac) {
                (*jac)(k, 0) = e;
                (*jac)(k, 1) = q[0] * e * d / (q[2] * q[2]);
                (*jac)(k, 2) = q[0] * e * d * d / (q[2] * q[2] * q[2]);
            }
        }
    };

    Eigen::VectorXd r, r_try;
    Eigen::MatrixXd jac;
    residuals(p, r, &jac);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        const Eigen::Matrix3d jtj = jac.transpose() * jac;
        const Eigen::Vector3d g = jac.transpose() * r;
        Eigen::Matrix3d a = jtj;
        a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
        const Eigen::Vector3d step = a.ldlt().solve(-g);
        const Eigen::Vector3d trial = p + step;
        if (!(trial[2] > 0.0) || !step.allFinite()) {
            lambda *= 10.0;
            continue;
        }
        residuals(trial, r_try, nullptr);
        const double c_try = r_try.squaredNorm();
        if (c_try < cost) {
            const bool small = step.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + p.cwiseAbs().maxCoeff());
            p = trial;
            const double rel = (cost - c_try) / std::max(cost, 1e-300);
            cost = c_try;
            residuals(p, r, &jac);
            lambda = std::max(lambda * 0.3, 1e-12);
            if (small || rel < 1e-14) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) {
                converged = true;  // no further descent possible: at a minimum to working precision
                break;
            }
        }
    }
    if (!converged || !p.allFinite()) throw FitError("gaussian fit did not converge", raw_width);
    return {p[0], p[1], std::abs(p[2])};
}

}  // namespace echolab
