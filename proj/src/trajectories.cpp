#include "echolab/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "echolab/errors.hpp"
#include "echolab/format.hpp"
#include "echolab/quadrature.hpp"

namespace echolab {

std::string_view to_string(Interpolation m) { return m == Interpolation::linear ? "linear" : "monotone_cubic"; }

std::string_view to_string(Extension e) { return e == Extension::hold ? "hold" : "linear_extend"; }

Interpolation interpolation_from_string(std::string_view s) {
    if (s == "linear") return Interpolation::linear;
    if (s == "monotone_cubic" || s == "pchip") return Interpolation::monotone_cubic;
    throw ValidationError("unknown interpolation method: " + std::string(s));
}

Extension extension_from_string(std::string_view s) {
    if (s == "hold") return Extension::hold;
    if (s == "linear_extend") return Extension::linear_extend;
    throw ValidationError("unknown extension policy: " + std::string(s));
}

namespace {

int sign(double x) { return (x > 0.0) - (x < 0.0); }

double end_slope(double h0, double h1, double del0, double del1) {
    double d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if (sign(d) != sign(del0))
        d = 0.0;
    else if (sign(del0) != sign(del1) && std::abs(d) > 3.0 * std::abs(del0))
        d = 3.0 * del0;
    return d;
}

}  // namespace

std::vector<double> monotone_slopes(const std::vector<double>& t, const std::vector<double>& f) {
    const std::size_t n = t.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    std::vector<double> h(n - 1), del(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        h[k] = t[k + 1] - t[k];
        del[k] = (f[k + 1] - f[k]) / h[k];
    }
    if (n == 2) {
        d[0] = d[1] = del[0];
        return d;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (sign(del[k - 1]) * sign(del[k]) <= 0) continue;
        const double w1 = 2.0 * h[k] + h[k - 1];
        const double w2 = h[k] + 2.0 * h[k - 1];
        d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
    }
    d[0] = end_slope(h[0], h[1], del[0], del[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    return d;
}

Trajectory::Trajectory(std::vector<double> times_ms, std::vector<double> freqs_khz, Interpolation method,
                       Extension extension)
    : t_(std::move(times_ms)), f_(std::move(freqs_khz)), method_(method), extension_(extension) {
    if (t_.size() < 2 || t_.size() != f_.size()) throw ValidationError("trajectory needs matching times and >= 2 nodes");
    for (std::size_t k = 0; k + 1 < t_.size(); ++k)
        if (!(t_[k + 1] > t_[k])) throw ValidationError("trajectory node times must be strictly increasing");
    for (double v : f_)
        if (!std::isfinite(v)) throw ValidationError("trajectory frequencies must be finite");
    const std::size_t n = t_.size();
    if (method_ == Interpolation::monotone_cubic) {
        d_ = monotone_slopes(t_, f_);
    } else {
        d_.resize(n);
        for (std::size_t k = 0; k + 1 < n; ++k) d_[k] = (f_[k + 1] - f_[k]) / (t_[k + 1] - t_[k]);
        d_[n - 1] = d_[n - 2];
    }
    cumulative_.assign(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) cumulative_[k + 1] = cumulative_[k] + segment_integral(k, t_[k + 1]);
}

std::size_t Trajectory::segment(double t) const {
    const auto it = std::upper_bound(t_.begin() + 1, t_.end() - 1, t);
    return static_cast<std::size_t>(it - t_.begin()) - 1;
}

double Trajectory::operator()(double t) const {
    if (t <= t_.front()) return f_.front();
    if (t >= t_.back()) {
        if (extension_ == Extension::hold) return f_.back();
        return f_.back() + d_.back() * (t - t_.back());
    }
    const std::size_t k = segment(t);
    const double h = t_[k + 1] - t_[k];
    const double s = (t - t_[k]) / h;
    if (method_ == Interpolation::linear) return f_[k] + s * (f_[k + 1] - f_[k]);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * f_[k] + (s3 - 2 * s2 + s) * h * d_[k] + (-2 * s3 + 3 * s2) * f_[k + 1] +
           (s3 - s2) * h * d_[k + 1];
}

double Trajectory::segment_integral(std::size_t k, double t) const {
    if (method_ == Interpolation::linear) return 0.5 * (t - t_[k]) * (f_[k] + (*this)(t));
    // Four-point Gauss-Legendre is exact for the cubic pieces.
    const auto& rule = quad::gauss_legendre(4);
    const double half = 0.5 * (t - t_[k]);
    const double mid = 0.5 * (t + t_[k]);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * (*this)(mid + half * rule.nodes[i]);
    return half * s;
}

double Trajectory::integral(double t) const {
    if (t <= t_.front()) return f_.front() * (t - t_.front());
    if (t >= t_.back()) {
        const double dt = t - t_.back();
        double tail = f_.back() * dt;
        if (extension_ == Extension::linear_extend) tail += 0.5 * d_.back() * dt * dt;
        return cumulative_.back() + tail;
    }
    const std::size_t k = segment(t);
    return cumulative_[k] + segment_integral(k, t);
}

Trajectory interpolate(const FrequencyTriple& triple, Interpolation method, Extension extension,
                       const std::array<double, 3>& node_times_ms) {
    return Trajectory({node_times_ms.begin(), node_times_ms.end()}, {triple.w0, triple.w2, triple.w5}, method,
                      extension);
}

void WindowSpec::validate() const {
    if (!(width_khz > 0.0) || !std::isfinite(center_khz)) throw ValidationError("window width must be positive");
    if (node < 0 || node > 2) throw ValidationError("window node index must be 0, 1 or 2");
}

Spectrum1D windowed_final_probability(const SkewNormalParams& params, const WindowSpec& w0_window,
                                      const WindowSpec& w2_window, const GridSpec& grid) {
    w0_window.validate();
    w2_window.validate();
    if (w0_window.node != 0 || w2_window.node != 1)
        throw ValidationError("final-probability windows must constrain nodes 0 and 1");
    const SkewNormal model(params);
    Spectrum1D out;
    out.freq_khz = grid.axis();
    const auto& rule = quad::gauss_legendre(20);

    auto curve = [&](std::size_t panels) {
        auto nodes = [&](const WindowSpec& win, std::vector<double>& x, std::vector<double>& a) {
            std::vector<double> px, pa;
            const double w = win.width_khz / static_cast<double>(panels);
            for (std::size_t p = 0; p < panels; ++p) {
                quad::map_rule(rule, win.lo() + static_cast<double>(p) * w, win.lo() + static_cast<double>(p + 1) * w,
                               px, pa);
                x.insert(x.end(), px.begin(), px.end());
                a.insert(a.end(), pa.begin(), pa.end());
            }
        };
        std::vector<double> x0, a0, x2, a2;
        nodes(w0_window, x0, a0);
        nodes(w2_window, x2, a2);
        std::vector<double> vals(out.freq_khz.size(), 0.0);
        for (std::size_t m = 0; m < vals.size(); ++m) {
            double s = 0.0;
            for (std::size_t i = 0; i < x0.size(); ++i)
                for (std::size_t j = 0; j < x2.size(); ++j)
                    s += a0[i] * a2[j] * model.density(FrequencyTriple{x0[i], x2[j], out.freq_khz[m]});
            vals[m] = s;
        }
        return vals;
    };

    std::vector<double> prev = curve(1);
    for (std::size_t panels = 2; panels <= 32; panels *= 2) {
        std::vector<double> next = curve(panels);
        double diff = 0.0, peak = 0.0;
        for (std::size_t m = 0; m < next.size(); ++m) {
            diff = std::max(diff, std::abs(next[m] - prev[m]));
            peak = std::max(peak, std::abs(next[m]));
        }
        if (diff <= 1e-9 * peak || peak == 0.0) {
            out.values = std::move(next);
            return out;
        }
        prev = std::move(next);
    }
    throw ConvergenceError("windowed final probability did not converge", prev.empty() ? 0.0 : prev.front());
}

std::vector<TrajectorySample> sample_trajectories(const SkewNormalParams& params, const WindowSpec& w0_window,
                                                  const WindowSpec& w2_window, std::size_t n, std::uint64_t seed,
                                                  Interpolation method, Extension extension) {
    if (n == 0) throw ValidationError("sample count must be at least 1");
    w0_window.validate();
    w2_window.validate();
    const SkewNormal model(params);
    constexpr std::size_t kBatch = 100000;
    constexpr std::size_t kMaxDraws = 200000000;
    std::vector<TrajectorySample> out;
    std::size_t drawn = 0;
    for (std::uint64_t batch = 0; out.size() < n; ++batch) {
        const auto draws = sn_sample(model, kBatch, seed + batch * 0x9E3779B97F4A7C15ULL);
        for (const auto& w : draws) {
            if (!w0_window.contains(w[w0_window.node]) || !w2_window.contains(w[w2_window.node])) continue;
            out.push_back({w, interpolate(w, method, extension, params.node_times_ms), 0.0, model.density(w)});
            if (out.size() == n) break;
        }
        drawn += kBatch;
        const double rate = static_cast<double>(out.size()) / static_cast<double>(drawn);
        if (out.size() < n && (rate < 1e-4 || drawn >= kMaxDraws))
            throw ValidationError("window too narrow: acceptance rate " + format_number(rate));
    }
    for (auto& s : out) s.weight = 1.0 / static_cast<double>(n);
    return out;
}

void write_trajectories_csv(std::ostream& os, const std::vector<TrajectorySample>& samples, double t_max_ms,
                            double step_ms) {
    os << "time_ms,freq_khz,trajectory_id,weight\n";
    const auto steps = static_cast<std::size_t>(std::floor(t_max_ms / step_ms + 0.5));
    for (std::size_t id = 0; id < samples.size(); ++id) {
        const auto& s = samples[id];
        for (std::size_t i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) * step_ms;
            os << format_number(t) << ',' << format_number(s.trajectory(t)) << ',' << id << ','
               << format_number(s.weight) << '\n';
        }
    }
}

}  // namespace echolab
