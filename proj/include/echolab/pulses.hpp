#pragma once

#include <numbers>
#include <vector>

#include "echolab/grid.hpp"

namespace echolab {

/// Phase-modulation pulse phi(t) = A [1 - cos(2 pi f t)] inside a square window of `cycles` periods.
///
/// omega_m_khz is the modulation frequency in kHz (cycles per ms).
struct PulseSpec {
    double omega_m_khz = 6.0;
    double amplitude_rad = 2.0 * std::numbers::pi / 72.0;
    int cycles = 8;

    double duration_ms() const { return static_cast<double>(cycles) / omega_m_khz; }
    /// Throws ValidationError unless omega_m > 0 and cycles >= 1.
    void validate() const;

    bool operator==(const PulseSpec&) const = default;
};

/// Phase (rad) at time t (ms); zero outside [0, T].
double pulse_waveform(const PulseSpec& spec, double t_ms);

/// Unnormalized |F(nu)|^2 of the resonant (positive-frequency) half of the windowed
/// carrier A cos(2 pi f t), t in [0, T].
double power_density(const PulseSpec& spec, double freq_khz);

struct PowerSpectrum {
    std::vector<double> freq_khz;
    std::vector<double> power;  ///< sum(power) * step == 1
    double step = 0.0;
    /// Fraction of the resonant component's energy (Parseval) captured by the grid.
    double captured = 0.0;

    double peak_frequency() const;
};

/// Grid of carrier +- 12/T at the given step.
GridSpec default_spectrum_grid(const PulseSpec& spec, double step = 0.005);

/// Power spectrum on `grid`, normalized to unit mass. Throws CoverageError when the grid
/// holds less than 99% of the spectral energy.
PowerSpectrum pulse_power_spectrum(const PulseSpec& spec, const GridSpec& grid);

/// Convolution kernel for a grid of spacing `step`: the main lobe of the power spectrum
/// (carrier +- 1/T) sampled at offsets k*step and normalized to unit sum. Index
/// `half` is the zero offset; the vector has 2*half+1 entries.
std::vector<double> convolution_kernel(const PulseSpec& spec, double step);

/// r.m.s. width (Hz) of a Gaussian fit to the main lobe of one pulse's power spectrum.
double pulse_width_hz(const PulseSpec& spec);

/// r.m.s. width (Hz) of a Gaussian fit to the convolution of the pump and probe main
/// lobes, the same line shapes the forward model convolves with. On fit failure throws FitError with the raw second-moment width attached.
double instrumental_width(const PulseSpec& pump, const PulseSpec& probe);

}  // namespace echolab
