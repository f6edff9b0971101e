#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "echolab/grid.hpp"
#include "echolab/pulses.hpp"
#include "echolab/skew_normal.hpp"

namespace echolab {

/// Measurement delays (ms) of the three 2D spectra.
inline constexpr std::array<double, 3> kDelaysMs{2.0, 3.0, 5.0};

/// Node pair modelling each delay: 2 ms -> (w0, w2), 3 ms -> (w2, w5) by stationarity,
/// 5 ms -> (w0, w5). The first node is the pump axis.
NodePair pair_for_delay(double delay_ms);

/// Pump and probe pulse pair.
struct PulsePair {
    PulseSpec pump;
    PulseSpec probe;

    bool operator==(const PulsePair&) const = default;
};

struct Dataset {
    std::array<SpectrumGrid2D, 3> grids;      ///< delays 2, 3, 5 ms
    std::array<Spectrum1D, 3> probe_alone;    ///< nodes 0, 2, 5 ms
    PulsePair pulses;
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    std::optional<SkewNormalParams> truth;

    /// Throws ValidationError if axes are inconsistent or delays are not (2, 3, 5).
    void validate() const;
};

/// Discrete 2D convolution with zero padding: kernels along the pump (rows) and probe
/// (columns) axes, each centred at index (size - 1) / 2.
SpectrumGrid2D convolve_2d(const SpectrumGrid2D& bare, const std::vector<double>& pump_kernel,
                           const std::vector<double>& probe_kernel);

std::vector<double> convolve_1d(const std::vector<double>& values, const std::vector<double>& kernel);

/// g = M conv pump-spectrum (pump axis) conv probe-spectrum (probe axis) on the given axes.
/// Throws CoverageError if the convolution loses more than 1e-3 of the bare mass.
SpectrumGrid2D convolved_marginal(const SkewNormal& model, NodePair keep, const PulsePair& pulses,
                                  const GridSpec& pump_grid, const GridSpec& probe_grid);

/// Univariate marginal of `node` convolved with the probe spectrum.
Spectrum1D probe_alone_spectrum(const SkewNormal& model, int node, const PulseSpec& probe, const GridSpec& grid);

struct HoleSpectrum {
    Spectrum1D profile;  ///< unit peak
    double pump_khz = 0.0;
    double delay_ms = 0.0;
    bool empty = false;  ///< pump outside the support: profile is all zeros
};

/// Conditional slice of the convolved joint at the pump frequency, scaled to unit peak.
HoleSpectrum hole_spectrum(const SkewNormal& model, double pump_khz, double delay_ms, const PulsePair& pulses,
                           const GridSpec& grid = kModelGrid);

struct HoleWidthPoint {
    double delay_ms = 0.0;
    double width_hz = 0.0;
    bool fit_ok = true;
};

struct HoleWidthCurve {
    std::vector<HoleWidthPoint> points;
    double instrumental_hz = 0.0;   ///< floor set by the pulse spectra
    double inhomogeneous_hz = 0.0;  ///< Gaussian-fit width of the node-0 probe-alone spectrum
};

HoleWidthCurve hole_width_curve(const SkewNormal& model, double pump_khz, const PulsePair& pulses,
                                const GridSpec& grid = kModelGrid);

/// Synthetic dataset: noiseless convolved marginals on `grid` plus Gaussian noise of
/// `noise_sigma` times each spectrum's peak. Deterministic for a given seed.
Dataset synth_dataset(const SkewNormalParams& truth, const PulsePair& pulses, const GridSpec& grid, double noise_sigma,
                      std::uint64_t seed);

/// Model surfaces on a dataset's axes computed with the closed-form skew-normal
/// marginals. Used by the fitter; agrees with the quadrature path to ~1e-8.
class SurfaceModel {
public:
    explicit SurfaceModel(const Dataset& layout);

    struct Surfaces {
        std::array<std::vector<double>, 3> grids;  ///< row-major, dataset layout
        std::array<std::vector<double>, 3> probe_alone;
    };

    /// Returns false (leaving `out` unspecified) when the parameters are invalid.
    bool evaluate(const SkewNormalParams& params, Surfaces& out) const;

private:
    std::vector<double> pump_axis_, probe_axis_;
    std::vector<double> pump_kernel_, probe_kernel_;
};

}  // namespace echolab
