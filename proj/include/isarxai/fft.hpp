#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "isarxai/common.hpp"

namespace isarxai {

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative radix-2 decimation-in-time FFT over std::complex<double>.
// Power-of-two lengths only; the plan caches the bit-reversal permutation and
// per-stage twiddle tables so repeated transforms of one size cost no setup.
class FftPlan {
  public:
    explicit FftPlan(size_t n) : n_(n) {
        require_param(n >= 1 && (n & (n - 1)) == 0, "FftPlan: size must be a power of two");
        rev_.resize(n);
        size_t log2n = 0;
        while ((size_t{1} << log2n) < n) ++log2n;
        for (size_t i = 0; i < n; ++i) {
            size_t r = 0;
            for (size_t b = 0; b < log2n; ++b) r |= ((i >> b) & 1) << (log2n - 1 - b);
            rev_[i] = r;
        }
        // Twiddles for all stages concatenated: stage with half-size m contributes
        // m factors exp(-i*pi*k/m), k in [0, m).
        twiddle_.reserve(n);
        for (size_t m = 1; m < n; m <<= 1) {
            for (size_t k = 0; k < m; ++k) {
                double ang = -kPi * static_cast<double>(k) / static_cast<double>(m);
                twiddle_.emplace_back(std::cos(ang), std::sin(ang));
            }
        }
    }

    size_t size() const { return n_; }

    void forward(std::vector<cd>& a) const { transform(a, false); }
    void inverse(std::vector<cd>& a) const { transform(a, true); }

  private:
    void transform(std::vector<cd>& a, bool inv) const {
        require_param(a.size() == n_, "FftPlan: input length does not match plan size");
        for (size_t i = 0; i < n_; ++i) {
            size_t r = rev_[i];
            if (i < r) std::swap(a[i], a[r]);
        }
        size_t toff = 0;
        for (size_t m = 1; m < n_; m <<= 1) {
            const cd* w = twiddle_.data() + toff;
            for (size_t start = 0; start < n_; start += 2 * m) {
                for (size_t k = 0; k < m; ++k) {
                    cd wk = inv ? std::conj(w[k]) : w[k];
                    cd u = a[start + k];
                    cd t = wk * a[start + k + m];
                    a[start + k] = u + t;
                    a[start + k + m] = u - t;
                }
            }
            toff += m;
        }
        if (inv) {
            double s = 1.0 / static_cast<double>(n_);
            for (auto& x : a) x *= s;
        }
    }

    size_t n_;
    std::vector<size_t> rev_;
    std::vector<cd> twiddle_;
};

// Plan cache keyed by size. thread_local so concurrent callers never contend.
inline const FftPlan& fft_plan(size_t n) {
    thread_local std::map<size_t, FftPlan> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, FftPlan(n)).first;
    return it->second;
}

inline void fft_inplace(std::vector<cd>& a) { fft_plan(a.size()).forward(a); }
inline void ifft_inplace(std::vector<cd>& a) { fft_plan(a.size()).inverse(a); }

}  // namespace isarxai
