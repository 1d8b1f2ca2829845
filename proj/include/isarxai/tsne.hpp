#pragma once
// Exact O(N^2) t-SNE for small feature sets: Gaussian input affinities with a
// per-point perplexity search, Student-t output kernel, momentum descent with
// early exaggeration. Also feature extraction from the classifier and a
// silhouette score for comparing embeddings.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "isarxai/common.hpp"
#include "isarxai/nn.hpp"
#include "isarxai/parallel.hpp"
#include "isarxai/rng.hpp"

namespace isarxai {

struct TsneConfig {
    double perplexity = 15.0;
    std::size_t n_iter = 1000;
    double learning_rate = 100.0;
    double momentum_start = 0.5;
    double momentum_late = 0.8;
    std::size_t momentum_switch_iter = 250;
    double early_exaggeration = 4.0;
    std::size_t exaggeration_iters = 100;
    std::uint64_t rng_seed = 0;

    void validate(std::size_t n_points) const {
        require_param(n_iter >= 100, "TsneConfig: n_iter must be at least 100");
        require_param(learning_rate > 0.0, "TsneConfig: learning_rate must be positive");
        require_param(perplexity > 1.0, "TsneConfig: perplexity must exceed 1");
        require_param(perplexity < static_cast<double>(n_points) / 3.0,
                      "TsneConfig: perplexity must be below a third of the point count");
        require_param(early_exaggeration >= 1.0, "TsneConfig: exaggeration must be at least 1");
    }
};

struct Embedding {
    std::vector<double> points;  // n x 2 row-major
    std::vector<int> labels;
    std::vector<double> kl_history;

    std::size_t size() const { return labels.size(); }
};

namespace detail {

inline std::vector<double> squared_distances(const double* x, std::size_t n, std::size_t d) {
    std::vector<double> d2(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                double diff = x[i * d + k] - x[j * d + k];
                acc += diff * diff;
            }
            d2[i * n + j] = acc;
            d2[j * n + i] = acc;
        }
    }
    return d2;
}

// Conditional distribution of row i at inverse bandwidth beta, plus its
// perplexity. Exponents are shifted by the row minimum for stability.
inline double row_conditional(const double* d2_row, std::size_t n, std::size_t i, double beta,
                              double* p_row) {
    double shift = std::numeric_limits<double>::max();
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) shift = std::min(shift, d2_row[j]);
    double sum = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
            p_row[j] = 0.0;
            continue;
        }
        double e = std::exp(-beta * (d2_row[j] - shift));
        p_row[j] = e;
        sum += e;
        weighted += e * (d2_row[j] - shift);
    }
    for (std::size_t j = 0; j < n; ++j) p_row[j] /= sum;
    double entropy = std::log(sum) + beta * weighted / sum;
    return std::exp(entropy);
}

}  // namespace detail

// Symmetrized Gaussian affinities: each row's bandwidth is bisected until the
// conditional perplexity matches the target within 1e-4, then
// P = (P_cond + P_cond^T) / (2n). The result has zero diagonal and sums to 1.
inline std::vector<double> pairwise_affinities(const double* x, std::size_t n, std::size_t d,
                                               double perplexity) {
    require_param(n >= 3, "pairwise_affinities: need at least 3 points");
    require_param(d >= 1, "pairwise_affinities: need at least 1 dimension");
    require_param(perplexity > 1.0 && perplexity < static_cast<double>(n),
                  "pairwise_affinities: perplexity out of range");

    std::vector<double> d2 = detail::squared_distances(x, n, d);
    std::vector<double> cond(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = d2.data() + i * n;
        double* p_row = cond.data() + i * n;
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        bool matched = false;
        for (int iter = 0; iter < 100; ++iter) {
            double perp = detail::row_conditional(row, n, i, beta, p_row);
            if (std::abs(perp - perplexity) <= 1e-4) {
                matched = true;
                break;
            }
            if (perp > perplexity) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = lo == 0.0 ? beta * 0.5 : 0.5 * (beta + lo);
            }
        }
        if (!matched)
            throw NumericalError("pairwise_affinities: perplexity search failed for point " +
                                 std::to_string(i));
    }

    std::vector<double> p(n * n, 0.0);
    double inv = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) * inv;
    return p;
}

// KL(P || Q) with the Student-t output kernel; zero-affinity pairs contribute
// nothing.
inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& y,
                            std::size_t n) {
    require_param(p.size() == n * n && y.size() == 2 * n, "kl_divergence: shape mismatch");
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            z += 2.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double pij = p[i * n + j];
            if (pij <= 0.0) continue;
            double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            double qij = 1.0 / ((1.0 + dx * dx + dy * dy) * z);
            kl += pij * std::log(pij / qij);
        }
    }
    return kl;
}

// Gradient of KL(P || Q) in the 2-d embedding:
// 4 * sum_j (p_ij - q_ij) * (y_i - y_j) / (1 + |y_i - y_j|^2).
inline std::vector<double> tsne_gradient(const std::vector<double>& p,
                                         const std::vector<double>& y, std::size_t n) {
    require_param(p.size() == n * n && y.size() == 2 * n, "tsne_gradient: shape mismatch");
    std::vector<double> w(n * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            double wij = 1.0 / (1.0 + dx * dx + dy * dy);
            w[i * n + j] = wij;
            w[j * n + i] = wij;
            z += 2.0 * wij;
        }
    }
    std::vector<double> grad(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double gx = 0.0, gy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double wij = w[i * n + j];
            double coeff = 4.0 * (p[i * n + j] - wij / z) * wij;
            gx += coeff * (y[2 * i] - y[2 * j]);
            gy += coeff * (y[2 * i + 1] - y[2 * j + 1]);
        }
        grad[2 * i] = gx;
        grad[2 * i + 1] = gy;
    }
    return grad;
}

// Momentum descent on KL(P || Q). The KL history tracks the true objective
// even while the gradient uses exaggerated affinities.
inline Embedding tsne(const std::vector<double>& x, std::size_t n, std::size_t d,
                      const TsneConfig& cfg, const std::vector<int>& labels = {}) {
    cfg.validate(n);
    require_param(x.size() == n * d, "tsne: feature matrix shape mismatch");
    require_param(labels.empty() || labels.size() == n, "tsne: labels must match point count");

    std::vector<double> p = pairwise_affinities(x.data(), n, d, cfg.perplexity);
    std::vector<double> p_exag = p;
    for (double& v : p_exag) v *= cfg.early_exaggeration;

    Embedding emb;
    emb.labels = labels.empty() ? std::vector<int>(n, -1) : labels;
    emb.kl_history.reserve(cfg.n_iter);

    Rng rng(cfg.rng_seed);
    std::vector<double> y(2 * n);
    for (double& v : y) v = 1e-4 * rng.normal();
    std::vector<double> vel(2 * n, 0.0);

    for (std::size_t t = 0; t < cfg.n_iter; ++t) {
        const std::vector<double>& p_used = t < cfg.exaggeration_iters ? p_exag : p;
        std::vector<double> grad = tsne_gradient(p_used, y, n);
        double mom = t < cfg.momentum_switch_iter ? cfg.momentum_start : cfg.momentum_late;
        for (std::size_t i = 0; i < 2 * n; ++i) {
            vel[i] = mom * vel[i] - cfg.learning_rate * grad[i];
            y[i] += vel[i];
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += y[2 * i];
            my += y[2 * i + 1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[2 * i] -= mx;
            y[2 * i + 1] -= my;
        }
        double kl = kl_divergence(p, y, n);
        if (!std::isfinite(kl))
            throw NumericalError("tsne: objective diverged at iteration " + std::to_string(t));
        emb.kl_history.push_back(kl);
    }
    for (double v : y)
        if (!std::isfinite(v)) throw NumericalError("tsne: non-finite coordinates");
    emb.points = std::move(y);
    return emb;
}

// Pre-softmax outputs for every image, row order preserved. Rows are the
// forward() logits, widened to double.
template <typename T>
std::vector<double> extract_output_features(const NetworkState<T>& net, const ImageSet& images) {
    std::size_t k = net.spec.n_classes();
    std::vector<double> out(images.size() * k);
    parallel_for(0, images.size(), [&](std::size_t i) {
        Tensor<T> logits = forward(net, images.image(i));
        for (std::size_t j = 0; j < k; ++j)
            out[i * k + j] = static_cast<double>(logits.data[j]);
    });
    return out;
}

// Mean silhouette over 2-d points: (b - a) / max(a, b) per point, where a is
// the mean distance inside its own cluster and b the smallest mean distance
// to another cluster. Singleton clusters score 0.
inline double silhouette_score(const std::vector<double>& points,
                               const std::vector<int>& labels) {
    std::size_t n = labels.size();
    require_param(points.size() == 2 * n, "silhouette_score: points must be n x 2");
    require_param(n >= 2, "silhouette_score: need at least 2 points");

    std::vector<int> classes;
    for (int lbl : labels) {
        bool seen = false;
        for (int c : classes) seen = seen || c == lbl;
        if (!seen) classes.push_back(lbl);
    }
    require_param(classes.size() >= 2, "silhouette_score: need at least 2 clusters");

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t own_count = 0;
        double own_sum = 0.0;
        double best_other = std::numeric_limits<double>::max();
        for (int c : classes) {
            if (c == labels[i]) continue;
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] != c) continue;
                double dx = points[2 * i] - points[2 * j];
                double dy = points[2 * i + 1] - points[2 * j + 1];
                sum += std::sqrt(dx * dx + dy * dy);
                ++count;
            }
            if (count > 0) best_other = std::min(best_other, sum / static_cast<double>(count));
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || labels[j] != labels[i]) continue;
            double dx = points[2 * i] - points[2 * j];
            double dy = points[2 * i + 1] - points[2 * j + 1];
            own_sum += std::sqrt(dx * dx + dy * dy);
            ++own_count;
        }
        if (own_count == 0) continue;  // singleton cluster scores 0
        double a = own_sum / static_cast<double>(own_count);
        double b = best_other;
        double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

}  // namespace isarxai
