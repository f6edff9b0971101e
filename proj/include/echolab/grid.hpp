#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace echolab {

/// Uniform axis description: lo, lo+step, ..., up to hi (inclusive within step/2).
struct GridSpec {
    double lo = 4.0;
    double hi = 9.0;
    double step = 0.05;

    std::vector<double> axis() const;
    std::size_t size() const;

    bool operator==(const GridSpec&) const = default;
};

/// Default model axis (kHz).
inline constexpr GridSpec kModelGrid{3.0, 10.0, 0.05};
/// Default axis for synthetic "measured" datasets (kHz).
inline constexpr GridSpec kDatasetGrid{4.0, 9.0, 0.25};

enum class SpectrumKind { measured, bare_marginal, convolved_marginal, hole_difference, increment_density };

std::string_view to_string(SpectrumKind kind);
SpectrumKind spectrum_kind_from_string(std::string_view name);

/// Values on a pump x probe grid, one row per pump frequency.
struct SpectrumGrid2D {
    std::vector<double> pump_khz;
    std::vector<double> probe_khz;
    std::vector<double> values;
    double delay_ms = 0.0;
    SpectrumKind kind = SpectrumKind::measured;

    SpectrumGrid2D() = default;
    SpectrumGrid2D(std::vector<double> pump, std::vector<double> probe, double delay, SpectrumKind k);

    std::size_t rows() const { return pump_khz.size(); }
    std::size_t cols() const { return probe_khz.size(); }
    double& at(std::size_t i, std::size_t j) { return values[i * probe_khz.size() + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * probe_khz.size() + j]; }

    /// Sum of values times the cell area (assumes uniform axes).
    double mass() const;
    /// Throws ValidationError if axes are not strictly ascending or values are non-finite
    /// (or negative, for density kinds).
    void validate() const;
};

/// A one-dimensional spectrum on a frequency axis.
struct Spectrum1D {
    std::vector<double> freq_khz;
    std::vector<double> values;

    double mass() const;
};

/// Uniform spacing of an axis; throws if it has fewer than two points.
double axis_step(const std::vector<double>& axis);

}  // namespace echolab
