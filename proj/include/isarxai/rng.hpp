#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "isarxai/common.hpp"

namespace isarxai {

// splitmix64 step (Steele/Lea/Flood). Passes BigCrush, one 64-bit word of state,
// and trivially seedable, which is what matters here: every stochastic quantity in
// the project must be reproducible from a single user-visible seed.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // Warm up so that small seeds (0, 1, 2, ...) diverge immediately.
        splitmix64(state_);
        splitmix64(state_);
    }

    // Independent child stream. Children with different keys never share a
    // state trajectory with the parent or each other in practice.
    Rng derive(uint64_t key) const {
        uint64_t s = state_ ^ (0x9e3779b97f4a7c15ULL * (key + 1));
        splitmix64(s);
        return Rng(s);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    size_t index(size_t n) {
        require_param(n > 0, "Rng::index: n must be positive");
        return static_cast<size_t>(next_u64() % n);
    }

    // One standard-normal pair via the Box-Muller polar form. u is kept in (0, 1]
    // so the log never sees zero.
    void normal_pair(double& z0, double& z1) {
        double u = 1.0 - uniform();
        double v = uniform();
        double r = std::sqrt(-2.0 * std::log(u));
        z0 = r * std::cos(2.0 * kPi * v);
        z1 = r * std::sin(2.0 * kPi * v);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double z0, z1;
        normal_pair(z0, z1);
        spare_ = z1;
        have_spare_ = true;
        return z0;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace isarxai
