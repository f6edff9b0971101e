#include "echolab/quadrature.hpp"

#include <map>
#include <mutex>
#include <numbers>

namespace echolab::quad {

namespace {

Rule compute_rule(std::size_t n) {
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        // Tricomi initial guess, then Newton on P_n.
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
            }
            pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.nodes[i] = -z;
        r.nodes[n - 1 - i] = z;
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

}  // namespace

const Rule& gauss_legendre(std::size_t order) {
    if (order == 0) throw ValidationError("Gauss-Legendre order must be positive");
    static std::mutex mtx;
    static std::map<std::size_t, Rule> cache;
    std::lock_guard lock(mtx);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, compute_rule(order)).first;
    return it->second;
}

void map_rule(const Rule& rule, double a, double b, std::vector<double>& x, std::vector<double>& w) {
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    x.resize(rule.size());
    w.resize(rule.size());
    for (std::size_t k = 0; k < rule.size(); ++k) {
        x[k] = mid + half * rule.nodes[k];
        w[k] = half * rule.weights[k];
    }
}

}  // namespace echolab::quad
