#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "isarxai/common.hpp"
#include "isarxai/parallel.hpp"
#include "isarxai/rng.hpp"
#include "isarxai/tensor.hpp"

namespace isarxai {

// Convolutional classifier: n blocks of [3x3 conv, same padding -> ReLU ->
// 2x2 max pool], then dense layers with ReLU between them. The last dense
// layer emits raw logits; softmax lives in the loss and in evaluate().
struct NetworkSpec {
    size_t input_h = 128;
    size_t input_w = 128;
    std::vector<size_t> conv_channels = {32, 64, 64, 128, 32};
    std::vector<size_t> fc_widths = {300, 100, 3};

    size_t n_blocks() const { return conv_channels.size(); }
    size_t n_fc() const { return fc_widths.size(); }
    size_t n_classes() const { return fc_widths.back(); }

    size_t feature_h() const { return input_h >> n_blocks(); }
    size_t feature_w() const { return input_w >> n_blocks(); }
    size_t flatten_size() const { return conv_channels.back() * feature_h() * feature_w(); }

    void validate() const {
        require_param(!conv_channels.empty(), "NetworkSpec: need at least one conv block");
        require_param(fc_widths.size() >= 1, "NetworkSpec: need at least one dense layer");
        size_t div = size_t{1} << n_blocks();
        require_param(input_h % div == 0 && input_w % div == 0,
                      "NetworkSpec: input size must be divisible by 2^n_blocks");
        require_param(feature_h() >= 1 && feature_w() >= 1,
                      "NetworkSpec: too many pools for the input size");
        for (size_t c : conv_channels)
            require_param(c >= 1, "NetworkSpec: conv channels must be positive");
        for (size_t f : fc_widths) require_param(f >= 1, "NetworkSpec: fc widths must be positive");
        require_param(n_classes() >= 2, "NetworkSpec: need at least two classes");
    }

    bool operator==(const NetworkSpec& o) const = default;
};

template <typename T>
struct ConvParams {
    Tensor<T> w;  // [out_c, in_c, 3, 3]
    Tensor<T> b;  // [out_c]
};

template <typename T>
struct DenseParams {
    Tensor<T> w;  // [out, in]
    Tensor<T> b;  // [out]
};

template <typename T>
struct NetworkState {
    NetworkSpec spec;
    std::vector<ConvParams<T>> conv;
    std::vector<DenseParams<T>> fc;

    size_t n_params() const {
        size_t n = 0;
        for (const auto& l : conv) n += l.w.numel() + l.b.numel();
        for (const auto& l : fc) n += l.w.numel() + l.b.numel();
        return n;
    }

    // Every parameter tensor in a fixed order (conv then fc, w then b).
    std::vector<Tensor<T>*> tensors() {
        std::vector<Tensor<T>*> out;
        for (auto& l : conv) { out.push_back(&l.w); out.push_back(&l.b); }
        for (auto& l : fc) { out.push_back(&l.w); out.push_back(&l.b); }
        return out;
    }
    std::vector<const Tensor<T>*> tensors() const {
        std::vector<const Tensor<T>*> out;
        for (const auto& l : conv) { out.push_back(&l.w); out.push_back(&l.b); }
        for (const auto& l : fc) { out.push_back(&l.w); out.push_back(&l.b); }
        return out;
    }
};

// Empty (all-zero) state shaped like the network; used for gradients and moments.
template <typename T>
NetworkState<T> make_zero_state(const NetworkSpec& spec) {
    spec.validate();
    NetworkState<T> s;
    s.spec = spec;
    size_t in_c = 1;
    for (size_t c : spec.conv_channels) {
        ConvParams<T> p;
        p.w = Tensor<T>({c, in_c, 3, 3});
        p.b = Tensor<T>({c});
        s.conv.push_back(std::move(p));
        in_c = c;
    }
    size_t in_f = spec.flatten_size();
    for (size_t f : spec.fc_widths) {
        DenseParams<T> p;
        p.w = Tensor<T>({f, in_f});
        p.b = Tensor<T>({f});
        s.fc.push_back(std::move(p));
        in_f = f;
    }
    return s;
}

// He-uniform weight init (limit sqrt(6/fan_in)), zero biases. The draw order is
// fixed, so one seed always yields the same parameters.
template <typename T>
NetworkState<T> initialize_network(const NetworkSpec& spec, uint64_t seed) {
    NetworkState<T> s = make_zero_state<T>(spec);
    Rng rng(seed);
    for (auto& l : s.conv) {
        double limit = std::sqrt(6.0 / static_cast<double>(l.w.shape[1] * 9));
        for (auto& v : l.w.data) v = static_cast<T>(rng.uniform(-limit, limit));
    }
    for (auto& l : s.fc) {
        double limit = std::sqrt(6.0 / static_cast<double>(l.w.shape[1]));
        for (auto& v : l.w.data) v = static_cast<T>(rng.uniform(-limit, limit));
    }
    return s;
}

template <typename To, typename From>
NetworkState<To> cast_network(const NetworkState<From>& in) {
    NetworkState<To> out = make_zero_state<To>(in.spec);
    for (size_t i = 0; i < in.conv.size(); ++i) {
        for (size_t j = 0; j < in.conv[i].w.numel(); ++j)
            out.conv[i].w.data[j] = static_cast<To>(in.conv[i].w.data[j]);
        for (size_t j = 0; j < in.conv[i].b.numel(); ++j)
            out.conv[i].b.data[j] = static_cast<To>(in.conv[i].b.data[j]);
    }
    for (size_t i = 0; i < in.fc.size(); ++i) {
        for (size_t j = 0; j < in.fc[i].w.numel(); ++j)
            out.fc[i].w.data[j] = static_cast<To>(in.fc[i].w.data[j]);
        for (size_t j = 0; j < in.fc[i].b.numel(); ++j)
            out.fc[i].b.data[j] = static_cast<To>(in.fc[i].b.data[j]);
    }
    return out;
}

// ---- layer primitives -------------------------------------------------------

// Patch matrix for a 3x3 same-padding conv: col is [9*c x h*w] row-major,
// row index (ci*9 + ky*3 + kx), column index (y*w + x).
template <typename T>
void im2col_3x3(const T* in, size_t c, size_t h, size_t w, T* col) {
    size_t hw = h * w;
    for (size_t ci = 0; ci < c; ++ci) {
        const T* plane = in + ci * hw;
        for (size_t ky = 0; ky < 3; ++ky) {
            for (size_t kx = 0; kx < 3; ++kx) {
                T* dst = col + (ci * 9 + ky * 3 + kx) * hw;
                ptrdiff_t dy = static_cast<ptrdiff_t>(ky) - 1;
                ptrdiff_t dx = static_cast<ptrdiff_t>(kx) - 1;
                for (size_t y = 0; y < h; ++y) {
                    ptrdiff_t sy = static_cast<ptrdiff_t>(y) + dy;
                    T* drow = dst + y * w;
                    if (sy < 0 || sy >= static_cast<ptrdiff_t>(h)) {
                        std::fill(drow, drow + w, T{});
                        continue;
                    }
                    const T* srow = plane + static_cast<size_t>(sy) * w;
                    size_t x0 = dx < 0 ? 1 : 0;
                    size_t x1 = dx > 0 ? w - 1 : w;
                    if (dx < 0) drow[0] = T{};
                    if (dx > 0) drow[w - 1] = T{};
                    for (size_t x = x0; x < x1; ++x)
                        drow[x] = srow[static_cast<size_t>(static_cast<ptrdiff_t>(x) + dx)];
                }
            }
        }
    }
}

// Adjoint of im2col_3x3: scatter-add col back onto the input layout.
template <typename T>
void col2im_3x3_add(const T* col, size_t c, size_t h, size_t w, T* in) {
    size_t hw = h * w;
    for (size_t ci = 0; ci < c; ++ci) {
        T* plane = in + ci * hw;
        for (size_t ky = 0; ky < 3; ++ky) {
            for (size_t kx = 0; kx < 3; ++kx) {
                const T* src = col + (ci * 9 + ky * 3 + kx) * hw;
                ptrdiff_t dy = static_cast<ptrdiff_t>(ky) - 1;
                ptrdiff_t dx = static_cast<ptrdiff_t>(kx) - 1;
                for (size_t y = 0; y < h; ++y) {
                    ptrdiff_t sy = static_cast<ptrdiff_t>(y) + dy;
                    if (sy < 0 || sy >= static_cast<ptrdiff_t>(h)) continue;
                    const T* srow = src + y * w;
                    T* drow = plane + static_cast<size_t>(sy) * w;
                    size_t x0 = dx < 0 ? 1 : 0;
                    size_t x1 = dx > 0 ? w - 1 : w;
                    for (size_t x = x0; x < x1; ++x)
                        drow[static_cast<size_t>(static_cast<ptrdiff_t>(x) + dx)] += srow[x];
                }
            }
        }
    }
}

// out[m x h x w] = kernel (*) in + bias, 3x3 kernel, same padding. bias may be
// null (the relevance backpass needs the bias-free response).
template <typename T>
void conv2d_forward(const T* in, size_t c, size_t h, size_t w, const T* kernel, const T* bias,
                    size_t m, T* out) {
    size_t hw = h * w;
    std::vector<T> col(9 * c * hw);
    im2col_3x3(in, c, h, w, col.data());
    mat_mul(out, kernel, col.data(), m, 9 * c, hw);
    if (bias) {
        for (size_t mi = 0; mi < m; ++mi) {
            T bv = bias[mi];
            T* row = out + mi * hw;
            for (size_t i = 0; i < hw; ++i) row[i] += bv;
        }
    }
}

// 2x2 max pool with stride 2. winners[c][oy*ow+ox] holds the flat plane index
// (y*w+x) of the selected input; ties go to the first element in row-major
// window order via the strict comparison.
template <typename T>
void maxpool2d_forward(const T* in, size_t c, size_t h, size_t w, T* out, uint32_t* winners) {
    require_param(h % 2 == 0 && w % 2 == 0, "maxpool2d_forward: odd input size");
    size_t oh = h / 2, ow = w / 2;
    for (size_t ci = 0; ci < c; ++ci) {
        const T* plane = in + ci * h * w;
        T* oplane = out + ci * oh * ow;
        uint32_t* wplane = winners + ci * oh * ow;
        for (size_t oy = 0; oy < oh; ++oy) {
            for (size_t ox = 0; ox < ow; ++ox) {
                size_t y = 2 * oy, x = 2 * ox;
                size_t best_idx = y * w + x;
                T best = plane[best_idx];
                const size_t cand[3] = {y * w + x + 1, (y + 1) * w + x, (y + 1) * w + x + 1};
                for (size_t k = 0; k < 3; ++k) {
                    if (plane[cand[k]] > best) {
                        best = plane[cand[k]];
                        best_idx = cand[k];
                    }
                }
                oplane[oy * ow + ox] = best;
                wplane[oy * ow + ox] = static_cast<uint32_t>(best_idx);
            }
        }
    }
}

// z[k] = W[k x n] * x[n] + b[k].
template <typename T>
void dense_forward(const T* x, const T* w, const T* b, size_t k, size_t n, T* z) {
    mat_mul(z, w, x, k, n, 1);
    for (size_t i = 0; i < k; ++i) z[i] += b[i];
}

// ---- forward pass ------------------------------------------------------------

// Activations kept for the backward and relevance passes.
template <typename T>
struct ForwardCache {
    std::vector<Tensor<T>> block_in;           // input to each conv block + final pooled map
    std::vector<Tensor<T>> conv_z;             // conv pre-activations
    std::vector<std::vector<uint32_t>> winners;
    std::vector<Tensor<T>> fc_in;              // input to each dense layer
    std::vector<Tensor<T>> fc_z;               // dense pre-activations; back() = logits
};

// Runs the network on one image (row-major input_h x input_w, any T source is
// cast in). Returns the logits; fills *cache when given.
template <typename T>
Tensor<T> forward(const NetworkState<T>& net, const float* image, ForwardCache<T>* cache = nullptr) {
    const NetworkSpec& spec = net.spec;
    ForwardCache<T> local;
    ForwardCache<T>& cc = cache ? *cache : local;
    cc.block_in.clear();
    cc.conv_z.clear();
    cc.winners.clear();
    cc.fc_in.clear();
    cc.fc_z.clear();

    Tensor<T> act({1, spec.input_h, spec.input_w});
    for (size_t i = 0; i < act.numel(); ++i) act.data[i] = static_cast<T>(image[i]);

    size_t c = 1, h = spec.input_h, w = spec.input_w;
    for (size_t blk = 0; blk < spec.n_blocks(); ++blk) {
        size_t m = spec.conv_channels[blk];
        cc.block_in.push_back(std::move(act));
        const Tensor<T>& a = cc.block_in.back();
        Tensor<T> z({m, h, w});
        conv2d_forward(a.ptr(), c, h, w, net.conv[blk].w.ptr(), net.conv[blk].b.ptr(), m, z.ptr());
        // ReLU into a scratch copy; the pre-activation stays cached for the mask.
        Tensor<T> r = z;
        for (auto& v : r.data) v = v > T{} ? v : T{};
        cc.conv_z.push_back(std::move(z));
        Tensor<T> pooled({m, h / 2, w / 2});
        std::vector<uint32_t> win(pooled.numel());
        maxpool2d_forward(r.ptr(), m, h, w, pooled.ptr(), win.data());
        cc.winners.push_back(std::move(win));
        act = std::move(pooled);
        c = m;
        h /= 2;
        w /= 2;
    }
    cc.block_in.push_back(std::move(act));

    // Flatten is a reinterpretation of the row-major [c, h, w] block.
    Tensor<T> x({spec.flatten_size()});
    x.data = cc.block_in.back().data;
    for (size_t li = 0; li < spec.n_fc(); ++li) {
        cc.fc_in.push_back(std::move(x));
        const Tensor<T>& a = cc.fc_in.back();
        size_t k = spec.fc_widths[li];
        Tensor<T> z({k});
        dense_forward(a.ptr(), net.fc[li].w.ptr(), net.fc[li].b.ptr(), k, a.numel(), z.ptr());
        cc.fc_z.push_back(z);
        if (li + 1 < spec.n_fc())
            for (auto& v : z.data) v = v > T{} ? v : T{};
        x = std::move(z);
    }
    return cc.fc_z.back();
}

// ---- loss and backward --------------------------------------------------------

// Numerically stable softmax cross-entropy. Returns the loss; fills dlogits
// with softmax(z) - onehot(label) when requested.
template <typename T>
T softmax_cross_entropy(const Tensor<T>& logits, int label, Tensor<T>* dlogits = nullptr) {
    size_t k = logits.numel();
    require_param(label >= 0 && static_cast<size_t>(label) < k,
                  "softmax_cross_entropy: label out of range");
    T mx = logits.data[0];
    for (T v : logits.data) mx = std::max(mx, v);
    T sum{};
    for (T v : logits.data) sum += std::exp(v - mx);
    T logz = std::log(sum) + mx;
    if (dlogits) {
        *dlogits = Tensor<T>({k});
        for (size_t i = 0; i < k; ++i) dlogits->data[i] = std::exp(logits.data[i] - mx) / sum;
        dlogits->data[static_cast<size_t>(label)] -= T{1};
    }
    return logz - logits.data[static_cast<size_t>(label)];
}

template <typename T>
void softmax(const Tensor<T>& logits, T* probs) {
    T mx = logits.data[0];
    for (T v : logits.data) mx = std::max(mx, v);
    T sum{};
    for (size_t i = 0; i < logits.numel(); ++i) {
        probs[i] = std::exp(logits.data[i] - mx);
        sum += probs[i];
    }
    for (size_t i = 0; i < logits.numel(); ++i) probs[i] /= sum;
}

// Accumulates parameter gradients for one image into grads (+=) given
// d(loss)/d(logits). grads must have the network's shapes.
template <typename T>
void backward(const NetworkState<T>& net, const ForwardCache<T>& cache, const Tensor<T>& dlogits,
              NetworkState<T>& grads) {
    const NetworkSpec& spec = net.spec;
    Tensor<T> dz = dlogits;
    for (size_t li = spec.n_fc(); li-- > 0;) {
        const Tensor<T>& a = cache.fc_in[li];
        size_t k = spec.fc_widths[li];
        // dW += dz x a, db += dz, da = W^T dz
        mat_mul_add(grads.fc[li].w.ptr(), dz.ptr(), a.ptr(), k, 1, a.numel());
        for (size_t i = 0; i < k; ++i) grads.fc[li].b.data[i] += dz.data[i];
        Tensor<T> da({a.numel()});
        mat_mul_at_b(da.ptr(), net.fc[li].w.ptr(), dz.ptr(), a.numel(), k, 1);
        if (li > 0) {
            // ReLU sat between the dense layers.
            const Tensor<T>& zprev = cache.fc_z[li - 1];
            for (size_t i = 0; i < da.numel(); ++i)
                if (!(zprev.data[i] > T{})) da.data[i] = T{};
        }
        dz = std::move(da);
    }

    // dz now matches the flattened final pooled map.
    size_t c = spec.conv_channels.back();
    size_t h = spec.feature_h(), w = spec.feature_w();
    Tensor<T> dpool({c, h, w});
    dpool.data = dz.data;
    for (size_t blk = spec.n_blocks(); blk-- > 0;) {
        size_t m = spec.conv_channels[blk];
        size_t ih = h * 2, iw = w * 2;
        const Tensor<T>& z = cache.conv_z[blk];
        // Unpool: route each pooled gradient to its winner, then the ReLU mask.
        Tensor<T> dr({m, ih, iw});
        const auto& win = cache.winners[blk];
        for (size_t ci = 0; ci < m; ++ci) {
            const T* src = dpool.ptr() + ci * h * w;
            T* dst = dr.ptr() + ci * ih * iw;
            const uint32_t* wp = win.data() + ci * h * w;
            for (size_t i = 0; i < h * w; ++i) dst[wp[i]] += src[i];
        }
        for (size_t i = 0; i < dr.numel(); ++i)
            if (!(z.data[i] > T{})) dr.data[i] = T{};

        const Tensor<T>& a = cache.block_in[blk];
        size_t ic = blk == 0 ? 1 : spec.conv_channels[blk - 1];
        size_t hw = ih * iw;
        std::vector<T> col(9 * ic * hw);
        im2col_3x3(a.ptr(), ic, ih, iw, col.data());
        // dW += dr * col^T, db += row sums of dr
        mat_mul_add_a_bt(grads.conv[blk].w.ptr(), dr.ptr(), col.data(), m, hw, 9 * ic);
        for (size_t mi = 0; mi < m; ++mi) {
            T s{};
            const T* row = dr.ptr() + mi * hw;
            for (size_t i = 0; i < hw; ++i) s += row[i];
            grads.conv[blk].b.data[mi] += s;
        }
        if (blk > 0) {
            // dcol[9ic x hw] = W^T dr, then scatter back onto the input grid.
            std::vector<T> dcol(9 * ic * hw);
            mat_mul_at_b(dcol.data(), net.conv[blk].w.ptr(), dr.ptr(), 9 * ic, m, hw);
            Tensor<T> da({ic, ih, iw});
            col2im_3x3_add(dcol.data(), ic, ih, iw, da.ptr());
            dpool = std::move(da);
        }
        h = ih;
        w = iw;
        c = ic;
    }
}

inline int argmax_lowest(const float* v, size_t n) {
    size_t best = 0;
    for (size_t i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<int>(best);
}

template <typename T>
int predicted_class(const Tensor<T>& logits) {
    size_t best = 0;
    for (size_t i = 1; i < logits.numel(); ++i)
        if (logits.data[i] > logits.data[best]) best = i;
    return static_cast<int>(best);
}

// ---- data container ------------------------------------------------------------

struct ImageSet {
    size_t height = 0;
    size_t width = 0;
    std::vector<float> pixels;  // size() * height * width
    std::vector<int> labels;

    size_t size() const { return labels.size(); }
    const float* image(size_t i) const { return pixels.data() + i * height * width; }
    void add(const float* img, int label) {
        pixels.insert(pixels.end(), img, img + height * width);
        labels.push_back(label);
    }
};

// ---- training --------------------------------------------------------------------

struct TrainConfig {
    size_t batch_size = 32;
    size_t epochs = 200;
    double learning_rate = 1e-3;
    double l1_lambda = 1e-3;  // on the second dense layer's weights
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    uint64_t seed = 0;
    size_t eval_every = 1;  // test-set pass every n-th epoch; the last epoch always gets one

    void validate() const {
        require_param(batch_size >= 1, "TrainConfig: batch_size must be positive");
        require_param(epochs >= 1, "TrainConfig: epochs must be positive");
        require_param(learning_rate > 0.0, "TrainConfig: learning_rate must be positive");
        require_param(l1_lambda >= 0.0, "TrainConfig: l1_lambda must be non-negative");
        require_param(eval_every >= 1, "TrainConfig: eval_every must be positive");
    }
};

// Index of the dense layer the L1 penalty applies to (the second one; a
// single-layer head gets the penalty on that layer).
inline size_t l1_layer_index(const NetworkSpec& spec) {
    return spec.n_fc() >= 2 ? 1 : 0;
}

template <typename T>
struct BatchStats {
    T loss{};
    size_t correct = 0;
};

// Mean cross-entropy over the batch plus the L1 term, with gradients written
// into grads (zeroed first). Per-image gradients are reduced in image order,
// so the result does not depend on the worker count.
template <typename T>
BatchStats<T> loss_and_grad(const NetworkState<T>& net, const ImageSet& set,
                            const std::vector<size_t>& batch, double l1_lambda,
                            NetworkState<T>& grads) {
    size_t bs = batch.size();
    require_param(bs >= 1, "loss_and_grad: empty batch");
    for (Tensor<T>* t : grads.tensors()) t->zero();

    std::vector<NetworkState<T>> per_image(bs);
    std::vector<T> losses(bs);
    std::vector<uint8_t> hit(bs, 0);
    parallel_for(0, bs, [&](size_t i) {
        per_image[i] = make_zero_state<T>(net.spec);
        ForwardCache<T> cache;
        Tensor<T> logits = forward(net, set.image(batch[i]), &cache);
        Tensor<T> dlogits;
        losses[i] = softmax_cross_entropy(logits, set.labels[batch[i]], &dlogits);
        T inv = T{1} / static_cast<T>(bs);
        for (auto& v : dlogits.data) v *= inv;
        backward(net, cache, dlogits, per_image[i]);
        hit[i] = predicted_class(logits) == set.labels[batch[i]] ? 1 : 0;
    });

    BatchStats<T> stats;
    auto gt = grads.tensors();
    for (size_t i = 0; i < bs; ++i) {
        stats.loss += losses[i];
        stats.correct += hit[i];
        auto st = per_image[i].tensors();
        for (size_t s = 0; s < gt.size(); ++s)
            for (size_t j = 0; j < gt[s]->numel(); ++j) gt[s]->data[j] += st[s]->data[j];
    }
    stats.loss /= static_cast<T>(bs);

    if (l1_lambda > 0.0) {
        size_t li = l1_layer_index(net.spec);
        T lam = static_cast<T>(l1_lambda);
        T sum{};
        const Tensor<T>& w = net.fc[li].w;
        Tensor<T>& gw = grads.fc[li].w;
        for (size_t j = 0; j < w.numel(); ++j) {
            sum += std::abs(w.data[j]);
            if (w.data[j] > T{}) gw.data[j] += lam;
            else if (w.data[j] < T{}) gw.data[j] -= lam;
            // exactly zero weights get no penalty gradient
        }
        stats.loss += lam * sum;
    }
    return stats;
}

template <typename T>
struct AdamState {
    NetworkState<T> m, v;
    uint64_t t = 0;

    static AdamState make(const NetworkSpec& spec) {
        return {make_zero_state<T>(spec), make_zero_state<T>(spec), 0};
    }
};

template <typename T>
void adam_step(NetworkState<T>& net, const NetworkState<T>& grads, AdamState<T>& opt,
               const TrainConfig& cfg) {
    opt.t += 1;
    T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    T lr = static_cast<T>(cfg.learning_rate), eps = static_cast<T>(cfg.adam_epsilon);
    T c1 = T{1} - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(opt.t)));
    T c2 = T{1} - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(opt.t)));
    auto wt = net.tensors();
    auto gt = grads.tensors();
    auto mt = opt.m.tensors();
    auto vt = opt.v.tensors();
    for (size_t s = 0; s < wt.size(); ++s) {
        Tensor<T>& w = *wt[s];
        for (size_t j = 0; j < w.numel(); ++j) {
            T gj = gt[s]->data[j];
            mt[s]->data[j] = b1 * mt[s]->data[j] + (T{1} - b1) * gj;
            vt[s]->data[j] = b2 * vt[s]->data[j] + (T{1} - b2) * gj * gj;
            T mh = mt[s]->data[j] / c1;
            T vh = vt[s]->data[j] / c2;
            w.data[j] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<size_t> confusion;     // n_classes x n_classes, rows = true class
    std::vector<int> predicted;        // per item
    std::vector<float> probabilities;  // per item, n_classes wide
};

template <typename T>
EvalResult evaluate(const NetworkState<T>& net, const ImageSet& set) {
    require_param(set.size() >= 1, "evaluate: empty set");
    size_t k = net.spec.n_classes();
    EvalResult res;
    res.confusion.assign(k * k, 0);
    res.predicted.assign(set.size(), -1);
    res.probabilities.assign(set.size() * k, 0.0f);
    std::vector<double> losses(set.size());
    parallel_for(0, set.size(), [&](size_t i) {
        Tensor<T> logits = forward(net, set.image(i));
        losses[i] = static_cast<double>(softmax_cross_entropy(logits, set.labels[i]));
        std::vector<T> probs(k);
        softmax(logits, probs.data());
        for (size_t j = 0; j < k; ++j)
            res.probabilities[i * k + j] = static_cast<float>(probs[j]);
        res.predicted[i] = predicted_class(logits);
    });
    size_t correct = 0;
    for (size_t i = 0; i < set.size(); ++i) {
        res.loss += losses[i];
        int t = set.labels[i];
        require_param(t >= 0 && static_cast<size_t>(t) < k, "evaluate: label out of range");
        res.confusion[static_cast<size_t>(t) * k + static_cast<size_t>(res.predicted[i])] += 1;
        if (res.predicted[i] == t) ++correct;
    }
    res.loss /= static_cast<double>(set.size());
    res.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
    return res;
}

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    bool evaluated = false;  // test metrics are only valid when this is set
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

// Minibatch training with a fresh shuffled order every epoch. Train metrics
// are running averages over the epoch's batches (the optimized objective,
// L1 included); test metrics come from a full pass after each epoch.
template <typename T>
TrainHistory train(NetworkState<T>& net, const ImageSet& train_set, const ImageSet& test_set,
                   const TrainConfig& cfg,
                   const std::function<void(size_t, const EpochStats&)>& progress = {}) {
    cfg.validate();
    require_param(train_set.size() >= 1, "train: empty training set");
    NetworkState<T> grads = make_zero_state<T>(net.spec);
    AdamState<T> opt = AdamState<T>::make(net.spec);
    Rng base(cfg.seed);
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});
    TrainHistory hist;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng = base.derive(epoch);
        erng.shuffle(order);
        double loss_sum = 0.0;
        size_t correct = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<size_t> batch(order.begin() + start, order.begin() + stop);
            BatchStats<T> bs = loss_and_grad(net, train_set, batch, cfg.l1_lambda, grads);
            adam_step(net, grads, opt, cfg);
            loss_sum += static_cast<double>(bs.loss) * static_cast<double>(batch.size());
            correct += bs.correct;
        }
        EpochStats es;
        es.train_loss = loss_sum / static_cast<double>(train_set.size());
        es.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
        bool eval_now = (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs;
        if (test_set.size() > 0 && eval_now) {
            EvalResult ev = evaluate(net, test_set);
            es.test_loss = ev.loss;
            es.test_accuracy = ev.accuracy;
            es.evaluated = true;
        }
        hist.epochs.push_back(es);
        if (progress) progress(epoch, es);
    }
    return hist;
}

}  // namespace isarxai
