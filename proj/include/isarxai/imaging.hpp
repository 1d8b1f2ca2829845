#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include "isarxai/common.hpp"
#include "isarxai/fft.hpp"
#include "isarxai/parallel.hpp"
#include "isarxai/scene.hpp"
#include "isarxai/waveform.hpp"

namespace isarxai {

// One-dimensional range profile after pulse compression. Bin i sits at range
// range_start + i * bin_spacing, measured relative to the standoff reference
// (0 = the rotation center).
struct Hrrp {
    std::vector<double> magnitudes;
    std::vector<cd> complex_profile;
    double bin_spacing = 0.0;
    double range_start = 0.0;

    double range_at(size_t i) const { return range_start + bin_spacing * static_cast<double>(i); }
};

namespace detail {

// Matched filtering against the transmit replica of a fixed chirp. Caches the
// replica and its padded spectra so per-row compression costs two FFTs, not
// three. Output is bitwise identical to matched_filter(echo, generate_chirp).
class PulseCompressor {
  public:
    explicit PulseCompressor(const ChirpSpec& spec) : spec_(spec), replica_(generate_chirp(spec)) {}

    const ChirpSpec& spec() const { return spec_; }
    const ComplexSeries& replica() const { return replica_; }

    ComplexSeries compress(const ComplexSeries& echo) {
        require_param(!echo.samples.empty(), "PulseCompressor: empty echo");
        require_param(echo.sample_rate == replica_.sample_rate,
                      "PulseCompressor: sample rates differ");
        size_t ne = echo.samples.size(), nr = replica_.samples.size();
        size_t full = ne + nr - 1;
        size_t n = next_pow2(full);
        const std::vector<cd>& bf = replica_spectrum(n);
        std::vector<cd> a(n, cd{});
        std::copy(echo.samples.begin(), echo.samples.end(), a.begin());
        const FftPlan& plan = fft_plan(n);
        plan.forward(a);
        for (size_t i = 0; i < n; ++i) a[i] *= std::conj(bf[i]);
        plan.inverse(a);
        ComplexSeries out;
        out.sample_rate = echo.sample_rate;
        out.t0 = echo.t0 - replica_.t0 - static_cast<double>(nr - 1) / echo.sample_rate;
        out.samples.resize(full);
        for (size_t i = 0; i < full; ++i) {
            ptrdiff_t lag = static_cast<ptrdiff_t>(i) - static_cast<ptrdiff_t>(nr - 1);
            size_t src = lag >= 0 ? static_cast<size_t>(lag) : n - static_cast<size_t>(-lag);
            out.samples[i] = a[src];
        }
        return out;
    }

  private:
    const std::vector<cd>& replica_spectrum(size_t n) {
        auto it = spectra_.find(n);
        if (it == spectra_.end()) {
            std::vector<cd> b(n, cd{});
            std::copy(replica_.samples.begin(), replica_.samples.end(), b.begin());
            fft_plan(n).forward(b);
            it = spectra_.emplace(n, std::move(b)).first;
        }
        return it->second;
    }

    ChirpSpec spec_;
    ComplexSeries replica_;
    std::map<size_t, std::vector<cd>> spectra_;
};

inline PulseCompressor& compressor_for(const ChirpSpec& spec) {
    using Key = std::tuple<double, double, double, double>;
    thread_local std::map<Key, PulseCompressor> cache;
    Key key{spec.f_start, spec.f_stop, spec.pulse_width, spec.sample_rate};
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, PulseCompressor(spec)).first;
    return it->second;
}

// Band-limited x8 (or xU) interpolation by spectral zero padding. Values at the
// original sample positions are preserved exactly.
inline std::vector<cd> fft_upsample(const std::vector<cd>& x, size_t factor) {
    size_t m = next_pow2(x.size());
    std::vector<cd> spec(m, cd{});
    std::copy(x.begin(), x.end(), spec.begin());
    fft_plan(m).forward(spec);
    size_t big = m * factor;
    std::vector<cd> up(big, cd{});
    size_t half = m / 2;
    for (size_t i = 0; i < half; ++i) up[i] = spec[i];
    for (size_t i = half + 1; i < m; ++i) up[big - m + i] = spec[i];
    up[half] = 0.5 * spec[half];
    up[big - half] = 0.5 * spec[half];
    fft_plan(big).inverse(up);
    double s = static_cast<double>(factor);
    for (auto& v : up) v *= s;
    return up;
}

}  // namespace detail

// Range profile of one echo row: pulse compression, then the lag axis mapped
// to range about the rotation center at standoff_range.
inline Hrrp form_hrrp(const ComplexSeries& echo_row, const ChirpSpec& chirp,
                      double standoff_range) {
    require_param(standoff_range > 0.0, "form_hrrp: standoff_range must be positive");
    ComplexSeries mf = detail::compressor_for(chirp).compress(echo_row);
    Hrrp h;
    h.bin_spacing = kSpeedOfLight / (2.0 * chirp.sample_rate);
    h.range_start = 0.5 * kSpeedOfLight * mf.t0 - standoff_range;
    h.complex_profile = std::move(mf.samples);
    h.magnitudes.resize(h.complex_profile.size());
    for (size_t i = 0; i < h.magnitudes.size(); ++i) h.magnitudes[i] = std::abs(h.complex_profile[i]);
    return h;
}

// Keep only bins with range in [r_lo, r_hi].
inline Hrrp crop_hrrp(const Hrrp& h, double r_lo, double r_hi) {
    require_param(r_lo < r_hi, "crop_hrrp: empty range window");
    ptrdiff_t n = static_cast<ptrdiff_t>(h.magnitudes.size());
    ptrdiff_t i0 = static_cast<ptrdiff_t>(std::ceil((r_lo - h.range_start) / h.bin_spacing));
    ptrdiff_t i1 = static_cast<ptrdiff_t>(std::floor((r_hi - h.range_start) / h.bin_spacing)) + 1;
    i0 = std::clamp<ptrdiff_t>(i0, 0, n);
    i1 = std::clamp<ptrdiff_t>(i1, 0, n);
    require_param(i0 < i1, "crop_hrrp: window outside the profile");
    Hrrp out;
    out.bin_spacing = h.bin_spacing;
    out.range_start = h.range_at(static_cast<size_t>(i0));
    out.magnitudes.assign(h.magnitudes.begin() + i0, h.magnitudes.begin() + i1);
    if (!h.complex_profile.empty())
        out.complex_profile.assign(h.complex_profile.begin() + i0, h.complex_profile.begin() + i1);
    return out;
}

// Image raster in the target frame at the start of the dwell. x grows with
// column index, y grows upward (row 0 is the largest y).
struct ImageGrid {
    size_t n_x = 128;
    size_t n_y = 128;
    double pixel_spacing = 0.009;  // m
    double center_x = 0.0;
    double center_y = 0.0;

    double x_at(size_t col) const {
        return center_x + pixel_spacing * (static_cast<double>(col) -
                                           0.5 * static_cast<double>(n_x - 1));
    }
    double y_at(size_t row) const {
        return center_y + pixel_spacing * (0.5 * static_cast<double>(n_y - 1) -
                                           static_cast<double>(row));
    }
    double extent_radius() const {
        double hx = 0.5 * pixel_spacing * static_cast<double>(n_x - 1) + std::abs(center_x);
        double hy = 0.5 * pixel_spacing * static_cast<double>(n_y - 1) + std::abs(center_y);
        return std::hypot(hx, hy);
    }

    void validate(double range_res) const {
        require_param(n_x >= 8 && n_y >= 8, "ImageGrid: grid must be at least 8x8");
        require_param(pixel_spacing > 0.0, "ImageGrid: pixel_spacing must be positive");
        require_param(pixel_spacing <= 0.5 * range_res * (1.0 + 1e-12),
                      "ImageGrid: pixel_spacing must not exceed half the range resolution");
    }
};

struct IsarImage {
    size_t height = 0;
    size_t width = 0;
    std::vector<float> pixels;  // row-major
    ImageGrid grid;
    double bandwidth = 0.0;  // Hz, from the chirp that formed the image
    double theta0 = 0.0;     // rad, body angle at the first pulse
    int label = -1;

    float& at(size_t row, size_t col) { return pixels[row * width + col]; }
    float at(size_t row, size_t col) const { return pixels[row * width + col]; }
};

struct BpOptions {
    size_t upsample = 8;       // profile oversampling for the delay interpolation
    bool exact_range = false;  // spherical instead of planar wavefronts
    bool hamming_taper = false;
};

// Time-domain back projection. Each row is pulse-compressed, upsampled, and
// every pixel integrates its own delay sample with the carrier phase restored.
// Pixels rotate by the angle accumulated since the first pulse, so the image
// lives in the dwell-start target frame and carries theta0 only as metadata.
inline IsarImage back_projection(const EchoMatrix& echoes, const ImageGrid& grid,
                                 const BpOptions& opts = {}) {
    require_param(echoes.n_pulses >= 1 && echoes.n_samples >= 2, "back_projection: empty echoes");
    require_param(opts.upsample >= 1, "back_projection: upsample must be >= 1");
    const ChirpSpec& chirp = echoes.chirp;
    grid.validate(range_resolution(chirp.bandwidth()));

    const double r0 = echoes.motion.standoff_range;
    const double fs = chirp.sample_rate;
    const double fc = chirp.center_frequency();
    detail::PulseCompressor& pc = detail::compressor_for(chirp);

    // Delay window all pixels can reach, padded for the interpolation stencil.
    double reach = grid.extent_radius() + 4.0 * kSpeedOfLight / (2.0 * fs);
    double tau_lo = 2.0 * (r0 - reach) / kSpeedOfLight;
    double tau_hi = 2.0 * (r0 + reach) / kSpeedOfLight;

    size_t n_up = 0;
    double t0_crop = 0.0;
    double fs_up = fs * static_cast<double>(opts.upsample);
    std::vector<std::vector<cd>> profiles(echoes.n_pulses);
    for (size_t p = 0; p < echoes.n_pulses; ++p) {
        ComplexSeries row = echoes.row_series(p);
        ComplexSeries mf = opts.hamming_taper
                               ? matched_filter(row, pc.replica(), true)
                               : pc.compress(row);
        ptrdiff_t i0 = static_cast<ptrdiff_t>(std::floor((tau_lo - mf.t0) * fs)) - 4;
        ptrdiff_t i1 = static_cast<ptrdiff_t>(std::ceil((tau_hi - mf.t0) * fs)) + 4;
        i0 = std::clamp<ptrdiff_t>(i0, 0, static_cast<ptrdiff_t>(mf.samples.size()));
        i1 = std::clamp<ptrdiff_t>(i1, 0, static_cast<ptrdiff_t>(mf.samples.size()));
        require_param(i1 - i0 >= 2, "back_projection: grid lies outside the receive window");
        std::vector<cd> crop(mf.samples.begin() + i0, mf.samples.begin() + i1);
        if (p == 0) t0_crop = mf.t0 + static_cast<double>(i0) / fs;
        profiles[p] = opts.upsample > 1 ? detail::fft_upsample(crop, opts.upsample)
                                        : std::move(crop);
        if (p == 0) n_up = profiles[0].size();
    }

    std::vector<double> cosd(echoes.n_pulses), sind(echoes.n_pulses);
    for (size_t p = 0; p < echoes.n_pulses; ++p) {
        double rel = echoes.pulse_angles[p] - echoes.pulse_angles[0];
        cosd[p] = std::cos(rel);
        sind[p] = std::sin(rel);
    }

    IsarImage img;
    img.height = grid.n_y;
    img.width = grid.n_x;
    img.grid = grid;
    img.bandwidth = chirp.bandwidth();
    img.theta0 = echoes.pulse_angles[0];
    img.pixels.assign(grid.n_y * grid.n_x, 0.0f);

    parallel_for(0, grid.n_y, [&](size_t row) {
        double y = grid.y_at(row);
        double x0 = grid.x_at(0);
        std::vector<cd> acc(grid.n_x, cd{});
        for (size_t p = 0; p < echoes.n_pulses; ++p) {
            const cd* prof = profiles[p].data();
            if (opts.exact_range) {
                for (size_t col = 0; col < grid.n_x; ++col) {
                    double x = grid.x_at(col);
                    double xr = x * cosd[p] - y * sind[p];
                    double yr = x * sind[p] + y * cosd[p];
                    double tau = 2.0 * std::hypot(r0 + xr, yr) / kSpeedOfLight;
                    double u = (tau - t0_crop) * fs_up;
                    double fu = std::floor(u);
                    ptrdiff_t k = static_cast<ptrdiff_t>(fu);
                    if (k < 0 || k + 1 >= static_cast<ptrdiff_t>(n_up)) continue;
                    double frac = u - fu;
                    cd v = prof[k] * (1.0 - frac) + prof[k + 1] * frac;
                    double ph = 2.0 * kPi * fc * tau;
                    acc[col] += v * cd(std::cos(ph), std::sin(ph));
                }
            } else {
                // Planar mode: delay and carrier phase are both linear in the
                // column, so the phase factor advances by one complex multiply
                // per pixel. Drift over a row is far below the test tolerances.
                double tau0 = 2.0 * (r0 + x0 * cosd[p] - y * sind[p]) / kSpeedOfLight;
                double dtau = 2.0 * grid.pixel_spacing * cosd[p] / kSpeedOfLight;
                double u0 = (tau0 - t0_crop) * fs_up;
                double du = dtau * fs_up;
                double ph0 = 2.0 * kPi * fc * tau0;
                double dph = 2.0 * kPi * fc * dtau;
                cd rot(std::cos(ph0), std::sin(ph0));
                cd rstep(std::cos(dph), std::sin(dph));
                for (size_t col = 0; col < grid.n_x; ++col, rot *= rstep) {
                    double u = u0 + du * static_cast<double>(col);
                    double fu = std::floor(u);
                    ptrdiff_t k = static_cast<ptrdiff_t>(fu);
                    if (k < 0 || k + 1 >= static_cast<ptrdiff_t>(n_up)) continue;
                    double frac = u - fu;
                    cd v = prof[k] * (1.0 - frac) + prof[k + 1] * frac;
                    acc[col] += v * rot;
                }
            }
        }
        for (size_t col = 0; col < grid.n_x; ++col)
            img.pixels[row * grid.n_x + col] = static_cast<float>(std::abs(acc[col]));
    });
    return img;
}

// Scale a non-negative image so its maximum is 1. All-zero input stays zero.
inline void normalize(IsarImage& img) {
    float mx = 0.0f;
    for (float v : img.pixels) {
        require_param(v >= 0.0f, "normalize: negative pixel");
        mx = std::max(mx, v);
    }
    if (mx > 0.0f)
        for (float& v : img.pixels) v /= mx;
}

// Bilinear resample to out_h x out_w (half-pixel center convention), then
// rescale so the maximum is 1 again.
inline IsarImage resample_to(const IsarImage& src, size_t out_h, size_t out_w) {
    require_param(src.height >= 2 && src.width >= 2, "resample_to: source too small");
    require_param(out_h >= 2 && out_w >= 2, "resample_to: output too small");
    IsarImage out;
    out.height = out_h;
    out.width = out_w;
    out.grid = src.grid;
    out.grid.n_x = out_w;
    out.grid.n_y = out_h;
    out.grid.pixel_spacing = src.grid.pixel_spacing * static_cast<double>(src.width) /
                             static_cast<double>(out_w);
    out.bandwidth = src.bandwidth;
    out.theta0 = src.theta0;
    out.label = src.label;
    out.pixels.resize(out_h * out_w);
    double sy = static_cast<double>(src.height) / static_cast<double>(out_h);
    double sx = static_cast<double>(src.width) / static_cast<double>(out_w);
    float mx = 0.0f;
    for (size_t i = 0; i < out_h; ++i) {
        double fy = (static_cast<double>(i) + 0.5) * sy - 0.5;
        double cy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
        size_t y0 = static_cast<size_t>(cy);
        size_t y1 = std::min(y0 + 1, src.height - 1);
        double wy = cy - static_cast<double>(y0);
        for (size_t j = 0; j < out_w; ++j) {
            double fx = (static_cast<double>(j) + 0.5) * sx - 0.5;
            double cx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
            size_t x0 = static_cast<size_t>(cx);
            size_t x1 = std::min(x0 + 1, src.width - 1);
            double wx = cx - static_cast<double>(x0);
            double v = (1.0 - wy) * ((1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1)) +
                       wy * ((1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1));
            float fv = static_cast<float>(v);
            out.pixels[i * out_w + j] = fv;
            mx = std::max(mx, fv);
        }
    }
    if (mx > 0.0f)
        for (float& v : out.pixels) v /= mx;
    return out;
}

}  // namespace isarxai
