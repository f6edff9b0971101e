#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "echolab/errors.hpp"

namespace echolab::quad {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::size_t size() const { return nodes.size(); }
};

/// Rules are computed once per order and cached; the returned reference stays valid.
const Rule& gauss_legendre(std::size_t order);

/// Nodes/weights of `rule` mapped onto [a, b].
void map_rule(const Rule& rule, double a, double b, std::vector<double>& x, std::vector<double>& w);

/// Fixed-order composite Gauss-Legendre over `panels` equal panels of [a, b].
template <class F>
double composite(F&& f, double a, double b, std::size_t order, std::size_t panels) {
    const Rule& r = gauss_legendre(order);
    const double h = (b - a) / static_cast<double>(panels);
    double sum = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + h * static_cast<double>(p);
        const double half = 0.5 * h;
        const double mid = lo + half;
        double part = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) part += r.weights[k] * f(mid + half * r.nodes[k]);
        sum += half * part;
    }
    return sum;
}

struct PanelOptions {
    std::size_t order = 20;
    double rel_tol = 1e-8;
    double abs_floor = 1e-300;
    std::size_t max_panels = 256;
};

/// Composite Gauss-Legendre with the panel count doubled until two successive
/// estimates agree to `rel_tol`. Throws ConvergenceError carrying the last estimate.
template <class F>
double adaptive_panels(F&& f, double a, double b, const PanelOptions& opt = {}) {
    std::size_t panels = 1;
    double prev = composite(f, a, b, opt.order, panels);
    while (panels < opt.max_panels) {
        panels *= 2;
        const double cur = composite(f, a, b, opt.order, panels);
        if (std::abs(cur - prev) <= opt.rel_tol * std::abs(cur) || std::abs(cur) < opt.abs_floor)
            return cur;
        prev = cur;
    }
    throw ConvergenceError("panel quadrature did not converge", prev);
}

}  // namespace echolab::quad
