#pragma once

#include <cmath>
#include <vector>

#include "isarxai/common.hpp"
#include "isarxai/fft.hpp"

namespace isarxai {

// Linear FM pulse at complex baseband. The carrier never appears as a sampled
// waveform; it enters the echo model as an analytic phase factor on each delay.
struct ChirpSpec {
    double f_start = 32e9;      // Hz, lower edge of the swept band
    double f_stop = 40e9;       // Hz, upper edge
    double pulse_width = 4e-6;  // s
    double pri = 5e-6;          // s, pulse repetition interval
    double sample_rate = 10e9;  // complex samples per second

    double bandwidth() const { return f_stop - f_start; }
    double center_frequency() const { return 0.5 * (f_start + f_stop); }
    double chirp_rate() const { return bandwidth() / pulse_width; }
    size_t n_samples() const { return static_cast<size_t>(std::llround(pulse_width * sample_rate)); }

    void validate() const {
        require_param(f_start > 0.0 && f_stop > f_start, "ChirpSpec: need 0 < f_start < f_stop");
        require_param(pulse_width > 0.0, "ChirpSpec: pulse_width must be positive");
        require_param(pri >= pulse_width, "ChirpSpec: pri must cover the pulse");
        require_param(sample_rate >= bandwidth(),
                      "ChirpSpec: sample_rate below bandwidth aliases the baseband chirp");
    }

    bool operator==(const ChirpSpec& o) const {
        return f_start == o.f_start && f_stop == o.f_stop && pulse_width == o.pulse_width &&
               pri == o.pri && sample_rate == o.sample_rate;
    }
};

// Uniformly sampled complex signal. t0 is the time of samples[0]; on matched
// filter output the time axis reads as round-trip delay.
struct ComplexSeries {
    std::vector<cd> samples;
    double sample_rate = 0.0;
    double t0 = 0.0;
};

// Baseband chirp exp(j*pi*K*(t - Tp/2)^2), K = B/Tp, over t in [0, Tp).
// Centering the quadratic phase at Tp/2 sweeps -B/2..+B/2 about the carrier.
inline ComplexSeries generate_chirp(const ChirpSpec& spec) {
    spec.validate();
    size_t n = spec.n_samples();
    require_param(n >= 2, "generate_chirp: pulse shorter than two samples");
    ComplexSeries out;
    out.sample_rate = spec.sample_rate;
    out.t0 = 0.0;
    out.samples.resize(n);
    const double k = spec.chirp_rate();
    const double half = 0.5 * spec.pulse_width;
    for (size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / spec.sample_rate - half;
        double ph = kPi * k * t * t;
        out.samples[i] = cd(std::cos(ph), std::sin(ph));
    }
    return out;
}

namespace detail {

// Full linear cross-correlation corr[l] = sum_t echo[t] * conj(ref[t - l]) via
// zero-padded FFTs, l from -(nr-1) to ne-1. Output index i holds lag i-(nr-1).
inline std::vector<cd> xcorr_full(const std::vector<cd>& echo, const std::vector<cd>& ref) {
    size_t ne = echo.size(), nr = ref.size();
    size_t full = ne + nr - 1;
    size_t n = next_pow2(full);
    std::vector<cd> a(n, cd{}), b(n, cd{});
    std::copy(echo.begin(), echo.end(), a.begin());
    std::copy(ref.begin(), ref.end(), b.begin());
    const FftPlan& plan = fft_plan(n);
    plan.forward(a);
    plan.forward(b);
    for (size_t i = 0; i < n; ++i) a[i] *= std::conj(b[i]);
    plan.inverse(a);
    // Circular result places negative lags at the top end; unwrap to a linear axis.
    std::vector<cd> out(full);
    for (size_t i = 0; i < full; ++i) {
        ptrdiff_t lag = static_cast<ptrdiff_t>(i) - static_cast<ptrdiff_t>(nr - 1);
        size_t src = lag >= 0 ? static_cast<size_t>(lag) : n - static_cast<size_t>(-lag);
        out[i] = a[src];
    }
    return out;
}

}  // namespace detail

// Pulse compression. Correlates the echo against the reference replica; with
// taper=true the replica is Hamming-weighted, trading mainlobe width for lower
// range sidelobes. Output t0 is chosen so a scatterer at round-trip delay tau
// peaks at output time tau when the replica is the transmit pulse.
inline ComplexSeries matched_filter(const ComplexSeries& echo, const ComplexSeries& replica,
                                    bool hamming_taper = false) {
    require_param(!echo.samples.empty() && !replica.samples.empty(),
                  "matched_filter: empty input");
    require_param(echo.sample_rate == replica.sample_rate,
                  "matched_filter: sample rates differ");
    const std::vector<cd>* ref = &replica.samples;
    std::vector<cd> tapered;
    if (hamming_taper) {
        size_t n = replica.samples.size();
        tapered.resize(n);
        for (size_t i = 0; i < n; ++i) {
            double w = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                              static_cast<double>(n - 1));
            tapered[i] = replica.samples[i] * w;
        }
        ref = &tapered;
    }
    ComplexSeries out;
    out.samples = detail::xcorr_full(echo.samples, *ref);
    out.sample_rate = echo.sample_rate;
    out.t0 = echo.t0 - replica.t0 -
             static_cast<double>(replica.samples.size() - 1) / echo.sample_rate;
    return out;
}

// Slant-range resolution of a bandwidth-B pulse after compression.
inline double range_resolution(double bandwidth_hz) {
    require_param(bandwidth_hz > 0.0, "range_resolution: bandwidth must be positive");
    return kSpeedOfLight / (2.0 * bandwidth_hz);
}

// Cross-range resolution from total rotation theta (rad) at carrier fc.
inline double azimuth_resolution(double carrier_hz, double total_angle_rad) {
    require_param(carrier_hz > 0.0, "azimuth_resolution: carrier must be positive");
    require_param(total_angle_rad > 0.0, "azimuth_resolution: angle must be positive");
    return kSpeedOfLight / (2.0 * total_angle_rad * carrier_hz);
}

// Doppler shift of a scatterer at cross-range y on a target rotating at w rad/s.
inline double doppler_shift(double rotation_rate, double wavelength, double cross_range) {
    require_param(wavelength > 0.0, "doppler_shift: wavelength must be positive");
    return 2.0 * rotation_rate * cross_range / wavelength;
}

}  // namespace isarxai
