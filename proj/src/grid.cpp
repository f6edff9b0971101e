#include "echolab/grid.hpp"

#include <cmath>

#include "echolab/errors.hpp"

namespace echolab {

std::size_t GridSpec::size() const {
    if (!(step > 0.0) || !(hi > lo)) throw ValidationError("grid spec needs step > 0 and hi > lo");
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5)) + 1;
}

std::vector<double> GridSpec::axis() const {
    const std::size_t n = size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
    return out;
}

std::string_view to_string(SpectrumKind kind) {
    switch (kind) {
        case SpectrumKind::measured: return "measured";
        case SpectrumKind::bare_marginal: return "bare_marginal";
        case SpectrumKind::convolved_marginal: return "convolved_marginal";
        case SpectrumKind::hole_difference: return "hole_difference";
        case SpectrumKind::increment_density: return "increment_density";
    }
    return "measured";
}

SpectrumKind spectrum_kind_from_string(std::string_view name) {
    for (auto k : {SpectrumKind::measured, SpectrumKind::bare_marginal, SpectrumKind::convolved_marginal,
                   SpectrumKind::hole_difference, SpectrumKind::increment_density}) {
        if (to_string(k) == name) return k;
    }
    throw ValidationError("unknown spectrum kind '" + std::string(name) + "'");
}

SpectrumGrid2D::SpectrumGrid2D(std::vector<double> pump, std::vector<double> probe, double delay, SpectrumKind k)
    : pump_khz(std::move(pump)), probe_khz(std::move(probe)), values(pump_khz.size() * probe_khz.size(), 0.0),
      delay_ms(delay), kind(k) {}

double axis_step(const std::vector<double>& axis) {
    if (axis.size() < 2) throw ValidationError("axis needs at least two points");
    return (axis.back() - axis.front()) / static_cast<double>(axis.size() - 1);
}

double SpectrumGrid2D::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * axis_step(pump_khz) * axis_step(probe_khz);
}

void SpectrumGrid2D::validate() const {
    auto ascending = [](const std::vector<double>& a) {
        for (std::size_t i = 1; i < a.size(); ++i)
            if (!(a[i] > a[i - 1])) return false;
        return !a.empty();
    };
    if (!ascending(pump_khz) || !ascending(probe_khz)) throw ValidationError("grid axes must be strictly ascending");
    if (values.size() != rows() * cols()) throw ValidationError("grid value count does not match axes");
    const bool density = kind != SpectrumKind::hole_difference && kind != SpectrumKind::measured;
    for (double v : values) {
        if (!std::isfinite(v)) throw ValidationError("grid contains non-finite values");
        if (density && v < 0.0) throw ValidationError("density grid contains negative values");
    }
}

double Spectrum1D::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * axis_step(freq_khz);
}

}  // namespace echolab
