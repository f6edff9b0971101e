#include "echolab/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "echolab/errors.hpp"
#include "echolab/gaussian_fit.hpp"

namespace echolab {

namespace {

constexpr double kPi = std::numbers::pi;

// h(x) = integral_0^T exp(-2 pi i x t) dt
std::complex<double> window_transform(double x, double t) {
    const double u = kPi * x * t;
    const double sinc = std::abs(u) < 1e-8 ? 1.0 - u * u / 6.0 : std::sin(u) / u;
    return t * sinc * std::polar(1.0, -u);
}

void check_coverage(double captured) {
    if (captured < 0.99)
        throw CoverageError("frequency grid captures only " + std::to_string(captured) + " of the pulse spectrum",
                            captured);
}

}  // namespace

void PulseSpec::validate() const {
    if (!(omega_m_khz > 0.0) || !std::isfinite(omega_m_khz)) throw ValidationError("pulse omega_m must be positive");
    if (cycles < 1) throw ValidationError("pulse cycle count must be at least 1");
    if (!std::isfinite(amplitude_rad)) throw ValidationError("pulse amplitude must be finite");
}

double pulse_waveform(const PulseSpec& spec, double t_ms) {
    if (t_ms < 0.0 || t_ms > spec.duration_ms()) return 0.0;
    return spec.amplitude_rad * (1.0 - std::cos(2.0 * kPi * spec.omega_m_khz * t_ms));
}

double power_density(const PulseSpec& spec, double freq_khz) {
    const double t = spec.duration_ms();
    return std::norm(0.5 * spec.amplitude_rad * window_transform(freq_khz - spec.omega_m_khz, t));
}

double PowerSpectrum::peak_frequency() const {
    const auto it = std::max_element(power.begin(), power.end());
    return freq_khz[static_cast<std::size_t>(it - power.begin())];
}

GridSpec default_spectrum_grid(const PulseSpec& spec, double step) {
    const double half = 12.0 / spec.duration_ms();
    const double n = std::ceil(half / step);
    return {spec.omega_m_khz - n * step, spec.omega_m_khz + n * step, step};
}

PowerSpectrum pulse_power_spectrum(const PulseSpec& spec, const GridSpec& grid) {
    spec.validate();
    PowerSpectrum ps;
    ps.freq_khz = grid.axis();
    ps.step = grid.step;
    ps.power.resize(ps.freq_khz.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < ps.freq_khz.size(); ++i) {
        ps.power[i] = power_density(spec, ps.freq_khz[i]);
        sum += ps.power[i];
    }
    // Parseval: the resonant component (A/2) exp(2 pi i f t) on [0, T] carries A^2 T / 4.
    const double energy = 0.25 * spec.amplitude_rad * spec.amplitude_rad * spec.duration_ms();
    ps.captured = sum * grid.step / energy;
    check_coverage(ps.captured);
    for (double& p : ps.power) p /= sum * grid.step;
    return ps;
}

std::vector<double> convolution_kernel(const PulseSpec& spec, double step) {
    spec.validate();
    if (!(step > 0.0)) throw ValidationError("kernel step must be positive");
    const double lobe = 1.0 / spec.duration_ms();
    const auto half = static_cast<std::size_t>(std::floor(lobe / step * (1.0 - 1e-12)));
    std::vector<double> k(2 * half + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double off = (static_cast<double>(i) - static_cast<double>(half)) * step;
        k[i] = power_density(spec, spec.omega_m_khz + off);
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

namespace {

struct LineShape {
    std::vector<double> offset;
    std::vector<double> value;
};

LineShape line_shape(const PulseSpec& spec, double half_span, double step, bool open = false) {
    const auto n = static_cast<std::size_t>(std::ceil(half_span / step));
    LineShape s;
    s.offset.resize(2 * n + 1);
    s.value.resize(2 * n + 1);
    for (std::size_t i = 0; i < s.offset.size(); ++i) {
        s.offset[i] = (static_cast<double>(i) - static_cast<double>(n)) * step;
        s.value[i] = open && std::abs(s.offset[i]) >= half_span ? 0.0 : power_density(spec, spec.omega_m_khz + s.offset[i]);
    }
    return s;
}

}  // namespace

double pulse_width_hz(const PulseSpec& spec) {
    spec.validate();
    const double t = spec.duration_ms();
    const LineShape s = line_shape(spec, 3.0 / t, 1.0 / (200.0 * t));
    return 1000.0 * fit_gaussian(s.offset, s.value).sigma;
}

double instrumental_width(const PulseSpec& pump, const PulseSpec& probe) {
    pump.validate();
    probe.validate();
    const double t_wide = std::min(pump.duration_ms(), probe.duration_ms());
    const double t_narrow = std::max(pump.duration_ms(), probe.duration_ms());
    const double step = 1.0 / (50.0 * t_narrow) < 1.0 / (200.0 * t_wide) ? 1.0 / (50.0 * t_narrow)
                                                                         : 1.0 / (200.0 * t_wide);
    // Both spectra on a common offset grid wide enough for 12 side lobes of the wider one.
    // Main lobes only, matching the convolution kernels of the forward model.
    const LineShape a = line_shape(pump, 1.0 / pump.duration_ms(), step, true);
    const LineShape b = line_shape(probe, 1.0 / probe.duration_ms(), step, true);
    const double out_half = 2.0 * (1.0 / pump.duration_ms() + 1.0 / probe.duration_ms());
    const LineShape out_axis = line_shape(pump, out_half, step);
    std::vector<double> conv(out_axis.offset.size(), 0.0);
    const auto nb = static_cast<long>(b.offset.size());
    const long cb = (nb - 1) / 2;
    const long ca = (static_cast<long>(a.offset.size()) - 1) / 2;
    const long co = (static_cast<long>(out_axis.offset.size()) - 1) / 2;
    for (long o = 0; o < static_cast<long>(conv.size()); ++o) {
        double s = 0.0;
        for (long j = 0; j < nb; ++j) {
            const long ia = (o - co) - (j - cb) + ca;
            if (ia < 0 || ia >= static_cast<long>(a.value.size())) continue;
            s += a.value[static_cast<std::size_t>(ia)] * b.value[static_cast<std::size_t>(j)];
        }
        conv[static_cast<std::size_t>(o)] = s;
    }
    try {
        return 1000.0 * fit_gaussian(out_axis.offset, conv).sigma;
    } catch (const FitError& e) {
        throw FitError(e.what(), 1000.0 * e.fallback_width());
    }
}

}  // namespace echolab
