#pragma once
// Z-rule relevance propagation through a trained network, heatmap rendering,
// and the relevance-reinjection probe.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "isarxai/common.hpp"
#include "isarxai/imaging.hpp"
#include "isarxai/nn.hpp"
#include "isarxai/tensor.hpp"

namespace isarxai {

struct LrpConfig {
    // Stabilizer is relative: the denominator offset is epsilon times the mean
    // absolute denominator of the layer being propagated.
    double epsilon = 1e-6;

    void validate() const { require_param(epsilon >= 0.0, "LrpConfig: epsilon must be >= 0"); }
};

// Signed per-pixel relevance aligned to the network input.
struct RelevanceMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;
    int target_class = -1;
    double seed_logit = 0.0;
};

// Relevance sums recorded after each propagation step, seed first, network
// input last. Pool steps reroute without changing the sum; conv and dense
// steps may leak the bias share of each output's relevance.
struct ConservationTrace {
    std::vector<std::string> layer;
    std::vector<double> relevance_sum;

    void record(std::string name, double sum) {
        layer.push_back(std::move(name));
        relevance_sum.push_back(sum);
    }
};

namespace detail {

// s[j] = r[j] / (den[j] + eps_abs * sign(den[j])), with sign(0) = +1. Outputs
// whose stabilized denominator is exactly zero contribute nothing instead of
// dividing by zero.
template <typename T>
void zrule_scales(const T* r, const T* den, std::size_t k, double epsilon, T* s) {
    double mean_abs = 0.0;
    for (std::size_t j = 0; j < k; ++j) mean_abs += std::abs(static_cast<double>(den[j]));
    mean_abs /= static_cast<double>(k);
    T eps_abs = static_cast<T>(epsilon * mean_abs);
    for (std::size_t j = 0; j < k; ++j) {
        T d = den[j] + (den[j] < T{} ? -eps_abs : eps_abs);
        s[j] = d == T{} ? T{} : r[j] / d;
    }
}

}  // namespace detail

// Dense z-rule step: relevance r_out over the k outputs of z = W a (bias
// excluded) redistributed onto the n inputs as a .* (W^T s).
template <typename T>
std::vector<T> lrp_dense(const T* r_out, const T* a_in, const T* w, std::size_t k, std::size_t n,
                         const LrpConfig& cfg) {
    cfg.validate();
    require_param(k > 0 && n > 0, "lrp_dense: empty layer");
    std::vector<T> den(k);
    mat_mul(den.data(), w, a_in, k, n, 1);
    std::vector<T> s(k);
    detail::zrule_scales(r_out, den.data(), k, cfg.epsilon, s.data());
    std::vector<T> r_in(n);
    mat_mul_at_b(r_in.data(), w, s.data(), n, k, 1);
    for (std::size_t i = 0; i < n; ++i) r_in[i] *= a_in[i];
    return r_in;
}

template <typename T>
Tensor<T> lrp_dense(const Tensor<T>& r_out, const Tensor<T>& a_in, const Tensor<T>& w,
                    const LrpConfig& cfg) {
    require_param(w.shape.size() == 2, "lrp_dense: weights must be 2-d");
    std::size_t k = w.shape[0], n = w.shape[1];
    require_param(r_out.numel() == k && a_in.numel() == n, "lrp_dense: shape mismatch");
    Tensor<T> r_in({n});
    r_in.data = lrp_dense(r_out.ptr(), a_in.ptr(), w.ptr(), k, n, cfg);
    return r_in;
}

namespace detail {

// Conv z-rule step with the bias-free responses already computed. Shares are
// scattered through the same im2col adjoint the gradient pass uses, so the
// result equals the dense materialization of the convolution.
template <typename T>
Tensor<T> lrp_conv_core(const T* r_out, const Tensor<T>& a_in, const T* kernel, std::size_t m,
                        const T* den, double epsilon) {
    std::size_t c = a_in.shape[0], h = a_in.shape[1], w = a_in.shape[2];
    std::size_t hw = h * w;
    std::vector<T> s(m * hw);
    zrule_scales(r_out, den, m * hw, epsilon, s.data());
    std::vector<T> scol(9 * c * hw);
    mat_mul_at_b(scol.data(), kernel, s.data(), 9 * c, m, hw);
    Tensor<T> r_in({c, h, w});
    col2im_3x3_add(scol.data(), c, h, w, r_in.ptr());
    for (std::size_t i = 0; i < r_in.numel(); ++i) r_in.data[i] *= a_in.data[i];
    return r_in;
}

}  // namespace detail

// Conv z-rule step: 3x3 same-padding convolution treated as the sparse linear
// layer it is. kernel is [m, c, 3, 3]; r_out covers the m output planes.
template <typename T>
Tensor<T> lrp_conv(const Tensor<T>& r_out, const Tensor<T>& a_in, const Tensor<T>& kernel,
                   const LrpConfig& cfg) {
    cfg.validate();
    require_param(a_in.shape.size() == 3, "lrp_conv: activations must be [c, h, w]");
    require_param(kernel.shape.size() == 4 && kernel.shape[2] == 3 && kernel.shape[3] == 3,
                  "lrp_conv: kernel must be [m, c, 3, 3]");
    std::size_t c = a_in.shape[0], h = a_in.shape[1], w = a_in.shape[2];
    std::size_t m = kernel.shape[0];
    require_param(kernel.shape[1] == c, "lrp_conv: kernel channel mismatch");
    require_param(r_out.numel() == m * h * w, "lrp_conv: relevance shape mismatch");
    std::vector<T> den(m * h * w);
    conv2d_forward<T>(a_in.ptr(), c, h, w, kernel.ptr(), nullptr, m, den.data());
    return detail::lrp_conv_core(r_out.ptr(), a_in, kernel.ptr(), m, den.data(), cfg.epsilon);
}

// Max-pool step: each output's relevance is routed entirely to the input
// position that won the forward 2x2 window.
template <typename T>
Tensor<T> lrp_pool(const Tensor<T>& r_out, const std::vector<std::uint32_t>& winners,
                   std::size_t c, std::size_t h, std::size_t w) {
    require_param(h % 2 == 0 && w % 2 == 0, "lrp_pool: odd input size");
    std::size_t per_plane = (h / 2) * (w / 2);
    require_param(r_out.numel() == c * per_plane && winners.size() == c * per_plane,
                  "lrp_pool: shape mismatch");
    Tensor<T> r_in({c, h, w});
    r_in.zero();
    for (std::size_t ci = 0; ci < c; ++ci) {
        const T* rplane = r_out.ptr() + ci * per_plane;
        const std::uint32_t* wplane = winners.data() + ci * per_plane;
        T* iplane = r_in.ptr() + ci * h * w;
        for (std::size_t i = 0; i < per_plane; ++i) iplane[wplane[i]] += rplane[i];
    }
    return r_in;
}

// ReLU is relevance-transparent: shares are formed from pre-activation
// contributions, so the unit's relevance passes through unchanged.
template <typename T>
Tensor<T> lrp_relu(const Tensor<T>& r_out) {
    return r_out;
}

namespace detail {

inline double sum_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

template <typename T>
double sum_of(const Tensor<T>& t) {
    double s = 0.0;
    for (const T& x : t.data) s += static_cast<double>(x);
    return s;
}

template <typename T>
double sum_of(const std::vector<T>& v) {
    double s = 0.0;
    for (const T& x : v) s += static_cast<double>(x);
    return s;
}

}  // namespace detail

// Propagates the chosen output logit back to the input pixels. target_class
// selects the seeded logit; a negative value uses the predicted class. Bias
// contributions absorb no relevance, so per-layer sums drift by the bias share
// of each output; the optional trace records the sum after every step.
template <typename T>
RelevanceMap explain(const NetworkState<T>& net, const float* image, const LrpConfig& cfg,
                     int target_class = -1, ConservationTrace* trace = nullptr) {
    cfg.validate();
    const NetworkSpec& spec = net.spec;
    require_param(target_class < static_cast<int>(spec.n_classes()),
                  "explain: class index out of range");

    ForwardCache<T> cache;
    Tensor<T> logits = forward(net, image, &cache);
    int cls = target_class >= 0 ? target_class : predicted_class(logits);
    double seed = static_cast<double>(logits.data[cls]);

    if (trace) {
        trace->layer.clear();
        trace->relevance_sum.clear();
        trace->record("seed", seed);
    }

    std::vector<T> r(spec.n_classes(), T{});
    r[cls] = logits.data[cls];

    // Dense layers in reverse. Denominators are recomputed bias-free from the
    // cached inputs rather than read from fc_z so the stabilized shares match
    // the standalone steps exactly.
    for (std::size_t li = spec.n_fc(); li-- > 0;) {
        const Tensor<T>& a = cache.fc_in[li];
        r = lrp_dense(r.data(), a.ptr(), net.fc[li].w.ptr(), spec.fc_widths[li], a.numel(), cfg);
        if (trace) trace->record("dense_" + std::to_string(li), detail::sum_of(r));
    }

    // Reinterpret the flattened relevance as the final pooled map.
    std::size_t c = spec.conv_channels.back();
    std::size_t h = spec.feature_h(), w = spec.feature_w();
    Tensor<T> rmap({c, h, w});
    rmap.data = std::move(r);

    for (std::size_t blk = spec.n_blocks(); blk-- > 0;) {
        const Tensor<T>& a = cache.block_in[blk];
        std::size_t in_c = a.shape[0], in_h = a.shape[1], in_w = a.shape[2];
        rmap = lrp_pool(rmap, cache.winners[blk], spec.conv_channels[blk], in_h, in_w);
        if (trace) trace->record("pool_" + std::to_string(blk), detail::sum_of(rmap));
        std::vector<T> den(spec.conv_channels[blk] * in_h * in_w);
        conv2d_forward<T>(a.ptr(), in_c, in_h, in_w, net.conv[blk].w.ptr(), nullptr,
                          spec.conv_channels[blk], den.data());
        rmap = detail::lrp_conv_core(rmap.ptr(), a, net.conv[blk].w.ptr(),
                                     spec.conv_channels[blk], den.data(), cfg.epsilon);
        if (trace) trace->record("conv_" + std::to_string(blk), detail::sum_of(rmap));
    }

    RelevanceMap map;
    map.height = spec.input_h;
    map.width = spec.input_w;
    map.target_class = cls;
    map.seed_logit = seed;
    map.values.resize(rmap.numel());
    for (std::size_t i = 0; i < rmap.numel(); ++i) map.values[i] = static_cast<double>(rmap.data[i]);
    return map;
}

template <typename T>
RelevanceMap explain(const NetworkState<T>& net, const IsarImage& image, const LrpConfig& cfg,
                     int target_class = -1, ConservationTrace* trace = nullptr) {
    require_param(image.height == net.spec.input_h && image.width == net.spec.input_w,
                  "explain: image does not match the network input size");
    return explain(net, image.pixels.data(), cfg, target_class, trace);
}

// 8-bit RGB raster, 3 bytes per pixel, row-major.
struct RgbImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

// Renders relevance on a fixed diverging ramp. Values are normalized by the
// map's max |value| and clamped to [-0.20, 1.00] of that scale; negatives ramp
// to blue, zero is black, positives ramp through green to yellow.
inline RgbImage render_heatmap(const RelevanceMap& map) {
    RgbImage img;
    img.height = map.height;
    img.width = map.width;
    img.pixels.assign(3 * map.height * map.width, 0);
    double scale = 0.0;
    for (double v : map.values) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return img;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        double t = std::clamp(map.values[i] / scale, -0.20, 1.00);
        double rch = 0.0, gch = 0.0, bch = 0.0;
        if (t >= 0.0) {
            gch = std::min(1.0, 2.0 * t);
            rch = std::max(0.0, 2.0 * t - 1.0);
        } else {
            bch = std::min(1.0, -t / 0.20);
        }
        img.pixels[3 * i + 0] = static_cast<std::uint8_t>(std::lround(255.0 * rch));
        img.pixels[3 * i + 1] = static_cast<std::uint8_t>(std::lround(255.0 * gch));
        img.pixels[3 * i + 2] = static_cast<std::uint8_t>(std::lround(255.0 * bch));
    }
    return img;
}

struct ReinjectResult {
    int predicted = -1;
    double probability = 0.0;
};

// Feeds a relevance map back through the classifier: min-max rescaled to
// [0, 1] so it lives in the input domain, then a plain forward pass. A
// constant map rescales to all zeros.
template <typename T>
ReinjectResult reinject(const NetworkState<T>& net, const RelevanceMap& map) {
    require_param(map.height == net.spec.input_h && map.width == net.spec.input_w,
                  "reinject: map does not match the network input size");
    double lo = map.values[0], hi = map.values[0];
    for (double v : map.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span = hi - lo;
    std::vector<float> pixels(map.values.size(), 0.0f);
    if (span > 0.0)
        for (std::size_t i = 0; i < pixels.size(); ++i)
            pixels[i] = static_cast<float>((map.values[i] - lo) / span);
    Tensor<T> logits = forward(net, pixels.data());
    std::vector<T> probs(logits.numel());
    softmax(logits, probs.data());
    ReinjectResult res;
    res.predicted = predicted_class(logits);
    res.probability = static_cast<double>(probs[res.predicted]);
    return res;
}

}  // namespace isarxai
