#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "isarxai/rng.hpp"
#include "isarxai/tsne.hpp"

using namespace isarxai;

namespace {

NetworkSpec reduced_spec() {
    NetworkSpec spec;
    spec.input_h = 16;
    spec.input_w = 16;
    spec.conv_channels = {8, 16};
    spec.fc_widths = {32, 3};
    spec.validate();
    return spec;
}

// Student-t output affinities computed directly from the definition.
std::vector<double> q_of(const std::vector<double>& y, std::size_t n) {
    std::vector<double> q(n * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            q[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
            z += q[i * n + j];
        }
    }
    for (double& v : q) v /= z;
    return q;
}

double purity(const Embedding& emb, int n_classes) {
    std::size_t n = emb.size();
    std::vector<double> cx(n_classes, 0.0), cy(n_classes, 0.0);
    std::vector<std::size_t> count(n_classes, 0);
    for (std::size_t i = 0; i < n; ++i) {
        cx[emb.labels[i]] += emb.points[2 * i];
        cy[emb.labels[i]] += emb.points[2 * i + 1];
        ++count[emb.labels[i]];
    }
    for (int c = 0; c < n_classes; ++c) {
        cx[c] /= static_cast<double>(count[c]);
        cy[c] /= static_cast<double>(count[c]);
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::max();
        for (int c = 0; c < n_classes; ++c) {
            double dx = emb.points[2 * i] - cx[c], dy = emb.points[2 * i + 1] - cy[c];
            double d = dx * dx + dy * dy;
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best == emb.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("pairwise_affinities is symmetric with unit mass and zero diagonal") {
    Rng rng(3);
    std::size_t n = 12, d = 4;
    std::vector<double> x(n * d);
    for (auto& v : x) v = rng.normal();
    std::vector<double> p = pairwise_affinities(x.data(), n, d, 3.0);

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(p[i * n + i] == 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(p[i * n + j] == p[j * n + i]);
            CHECK(p[i * n + j] >= 0.0);
            total += p[i * n + j];
        }
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("pairwise_affinities splits an equidistant triple evenly") {
    // Equilateral triangle: every conditional is 1/2 regardless of bandwidth,
    // so the only reachable perplexity is exactly 2.
    std::vector<double> x = {0.0, 0.0, 1.0, 0.0, 0.5, std::sqrt(3.0) / 2.0};
    std::vector<double> p = pairwise_affinities(x.data(), 3, 2, 2.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            CHECK(p[i * 3 + j] == Catch::Approx(1.0 / 6.0).margin(1e-9));
        }
    }
}

TEST_CASE("pairwise_affinities favors a duplicated point") {
    Rng rng(9);
    std::size_t n = 6, d = 2;
    std::vector<double> x(n * d);
    for (auto& v : x) v = rng.uniform(-2.0, 2.0);
    x[2] = x[0];
    x[3] = x[1];  // point 1 duplicates point 0
    std::vector<double> p = pairwise_affinities(x.data(), n, d, 2.5);
    for (std::size_t j = 2; j < n; ++j) {
        CHECK(p[0 * n + 1] > p[0 * n + j]);
        CHECK(p[1 * n + 0] > p[1 * n + j]);
    }
}

TEST_CASE("pairwise_affinities rejects unreachable targets") {
    // All points coincide: every conditional is uniform with perplexity n-1,
    // so no bandwidth can reach 2.
    std::size_t n = 6, d = 3;
    std::vector<double> x(n * d, 0.0);
    REQUIRE_THROWS_AS(pairwise_affinities(x.data(), n, d, 2.0), NumericalError);

    std::vector<double> ok(n * d);
    Rng rng(1);
    for (auto& v : ok) v = rng.normal();
    REQUIRE_THROWS_AS(pairwise_affinities(ok.data(), n, d, 0.5), ParameterError);
    REQUIRE_THROWS_AS(pairwise_affinities(ok.data(), n, d, 6.0), ParameterError);
    REQUIRE_THROWS_AS(pairwise_affinities(ok.data(), 2, d, 1.5), ParameterError);
}

TEST_CASE("tsne_gradient matches finite differences of the objective") {
    Rng rng(17);
    std::size_t n = 7, d = 3;
    std::vector<double> x(n * d);
    for (auto& v : x) v = rng.normal();
    std::vector<double> p = pairwise_affinities(x.data(), n, d, 2.0);

    std::vector<double> y(2 * n);
    for (auto& v : y) v = rng.uniform(-1.0, 1.0);

    std::vector<double> grad = tsne_gradient(p, y, n);
    double scale = 1.0;
    for (double g : grad) scale = std::max(scale, std::abs(g));

    const double h = 1e-6;
    for (std::size_t i = 0; i < 2 * n; ++i) {
        std::vector<double> yp = y, ym = y;
        yp[i] += h;
        ym[i] -= h;
        double fd = (kl_divergence(p, yp, n) - kl_divergence(p, ym, n)) / (2.0 * h);
        REQUIRE(std::abs(grad[i] - fd) <= 1e-5 * scale);
    }
}

TEST_CASE("tsne_gradient vanishes when P equals Q") {
    Rng rng(29);
    std::size_t n = 9;
    std::vector<double> y(2 * n);
    for (auto& v : y) v = rng.uniform(-2.0, 2.0);
    std::vector<double> q = q_of(y, n);
    std::vector<double> grad = tsne_gradient(q, y, n);
    for (double g : grad) CHECK(std::abs(g) <= 1e-9);
}

TEST_CASE("tsne_gradient is translation invariant") {
    Rng rng(31);
    std::size_t n = 8, d = 2;
    std::vector<double> x(n * d);
    for (auto& v : x) v = rng.normal();
    std::vector<double> p = pairwise_affinities(x.data(), n, d, 2.0);
    std::vector<double> y(2 * n);
    for (auto& v : y) v = rng.uniform(-1.0, 1.0);

    std::vector<double> shifted = y;
    for (std::size_t i = 0; i < n; ++i) {
        shifted[2 * i] += 13.5;
        shifted[2 * i + 1] -= 4.25;
    }
    std::vector<double> g0 = tsne_gradient(p, y, n);
    std::vector<double> g1 = tsne_gradient(p, shifted, n);
    for (std::size_t i = 0; i < 2 * n; ++i) CHECK(std::abs(g0[i] - g1[i]) <= 1e-9);
}

TEST_CASE("tsne separates well-spaced clusters deterministically") {
    Rng rng(41);
    const int per_cluster = 8;
    const std::size_t n = 3 * per_cluster, d = 3;
    std::vector<double> x(n * d);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        int c = static_cast<int>(i) / per_cluster;
        labels[i] = c;
        for (std::size_t k = 0; k < d; ++k)
            x[i * d + k] = (static_cast<std::size_t>(c) == k ? 10.0 : 0.0) + 0.3 * rng.normal();
    }

    TsneConfig cfg;
    cfg.perplexity = 5.0;
    cfg.n_iter = 300;
    cfg.rng_seed = 4;
    Embedding emb = tsne(x, n, d, cfg, labels);

    REQUIRE(emb.size() == n);
    REQUIRE(emb.points.size() == 2 * n);
    REQUIRE(emb.kl_history.size() == cfg.n_iter);
    for (double kl : emb.kl_history) {
        REQUIRE(std::isfinite(kl));
        REQUIRE(kl >= -1e-9);
    }
    CHECK(emb.kl_history.back() <= emb.kl_history[99]);
    CHECK(purity(emb, 3) >= 0.95);

    // Same seed, same embedding.
    Embedding again = tsne(x, n, d, cfg, labels);
    REQUIRE(again.points == emb.points);
    REQUIRE(again.kl_history == emb.kl_history);

    // The objective only sees pairwise distances, so a rigid rotation of the
    // result leaves it unchanged.
    double angle = 30.0 * kPi / 180.0;
    std::vector<double> rotated(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        double px = emb.points[2 * i], py = emb.points[2 * i + 1];
        rotated[2 * i] = px * std::cos(angle) - py * std::sin(angle);
        rotated[2 * i + 1] = px * std::sin(angle) + py * std::cos(angle);
    }
    std::vector<double> p = pairwise_affinities(x.data(), n, d, cfg.perplexity);
    CHECK(std::abs(kl_divergence(p, rotated, n) - kl_divergence(p, emb.points, n)) <= 1e-9);

    // Unlabeled points default to -1.
    Embedding bare = tsne(x, n, d, cfg);
    for (int lbl : bare.labels) REQUIRE(lbl == -1);
}

TEST_CASE("tsne validates its configuration") {
    Rng rng(43);
    std::size_t n = 24, d = 3;
    std::vector<double> x(n * d);
    for (auto& v : x) v = rng.normal();

    TsneConfig cfg;
    cfg.perplexity = 8.0;  // not below n / 3
    cfg.n_iter = 300;
    REQUIRE_THROWS_AS(tsne(x, n, d, cfg), ParameterError);

    cfg.perplexity = 5.0;
    cfg.n_iter = 50;
    REQUIRE_THROWS_AS(tsne(x, n, d, cfg), ParameterError);

    cfg.n_iter = 300;
    std::vector<int> labels(n - 1, 0);
    REQUIRE_THROWS_AS(tsne(x, n, d, cfg, labels), ParameterError);
    REQUIRE_THROWS_AS(tsne(x, n - 1, d, cfg), ParameterError);
}

TEST_CASE("extract_output_features returns the forward logits") {
    NetworkSpec spec = reduced_spec();
    auto net = initialize_network<float>(spec, 5);
    Rng rng(6);

    ImageSet set;
    set.height = spec.input_h;
    set.width = spec.input_w;
    std::vector<float> img(spec.input_h * spec.input_w);
    for (int i = 0; i < 4; ++i) {
        for (auto& v : img) v = static_cast<float>(rng.uniform());
        set.add(img.data(), i % 3);
    }
    set.add(set.image(1), 1);  // duplicate of image 1

    std::vector<double> feats = extract_output_features(net, set);
    REQUIRE(feats.size() == set.size() * 3);
    for (std::size_t i = 0; i < set.size(); ++i) {
        Tensor<float> logits = forward(net, set.image(i));
        for (std::size_t j = 0; j < 3; ++j)
            REQUIRE(feats[i * 3 + j] == static_cast<double>(logits.data[j]));
    }
    for (std::size_t j = 0; j < 3; ++j) REQUIRE(feats[4 * 3 + j] == feats[1 * 3 + j]);
}

TEST_CASE("silhouette_score rewards tight separated clusters") {
    std::vector<double> pts = {0.0, 0.0, 0.0, 1.0, 10.0, 0.0, 10.0, 1.0};
    std::vector<int> labels = {0, 0, 1, 1};
    double b = 0.5 * (10.0 + std::sqrt(101.0));
    double expected = (b - 1.0) / b;
    CHECK(silhouette_score(pts, labels) == Catch::Approx(expected).margin(1e-12));

    // Interleaved labels on the same layout score poorly.
    std::vector<int> bad = {0, 1, 0, 1};
    CHECK(silhouette_score(pts, bad) < 0.0);

    // Singleton cluster contributes zero.
    std::vector<int> lone = {0, 1, 1, 1};
    double s = silhouette_score(pts, lone);
    CHECK(std::isfinite(s));

    REQUIRE_THROWS_AS(silhouette_score(pts, std::vector<int>{0, 0, 0, 0}), ParameterError);
    REQUIRE_THROWS_AS(silhouette_score(pts, std::vector<int>{0, 1}), ParameterError);
}
