#include <catch2/catch_amalgamated.hpp>

#include "isarxai/nn.hpp"
#include "oracles.hpp"

using namespace isarxai;

namespace {

// Two-block network small enough for finite differences in double.
NetworkSpec reduced_spec() {
    NetworkSpec s;
    s.input_h = 16;
    s.input_w = 16;
    s.conv_channels = {8, 16};
    s.fc_widths = {32, 3};
    return s;
}

std::vector<float> random_image(size_t h, size_t w, uint64_t seed) {
    Rng rng(seed);
    std::vector<float> img(h * w);
    for (auto& v : img) v = static_cast<float>(rng.uniform());
    return img;
}

// Loss as a pure function of the parameters, for finite differencing.
double net_loss(const NetworkState<double>& net, const float* image, int label, double l1) {
    Tensor<double> logits = forward(net, image);
    double loss = softmax_cross_entropy(logits, label);
    if (l1 > 0.0) {
        const Tensor<double>& w = net.fc[l1_layer_index(net.spec)].w;
        double s = 0.0;
        for (double v : w.data) s += std::abs(v);
        loss += l1 * s;
    }
    return loss;
}

}  // namespace

TEST_CASE("conv2d_forward matches the six-loop definition") {
    Rng rng(21);
    size_t c = 3, h = 6, w = 5, m = 4;
    std::vector<double> in(c * h * w), k(m * c * 9), b(m), got(m * h * w), want(m * h * w);
    for (auto& v : in) v = rng.normal();
    for (auto& v : k) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    conv2d_forward(in.data(), c, h, w, k.data(), b.data(), m, got.data());
    oracle::naive_conv2d(in.data(), c, h, w, k.data(), b.data(), m, want.data());
    for (size_t i = 0; i < got.size(); ++i)
        REQUIRE(got[i] == Catch::Approx(want[i]).margin(1e-12));

    // bias-free variant
    conv2d_forward(in.data(), c, h, w, k.data(), static_cast<double*>(nullptr), m, got.data());
    oracle::naive_conv2d(in.data(), c, h, w, k.data(), static_cast<double*>(nullptr), m,
                         want.data());
    for (size_t i = 0; i < got.size(); ++i)
        REQUIRE(got[i] == Catch::Approx(want[i]).margin(1e-12));
}

TEST_CASE("maxpool2d_forward matches the definition and breaks ties row-major-first") {
    Rng rng(22);
    size_t c = 2, h = 6, w = 4;
    std::vector<double> in(c * h * w), got(c * (h / 2) * (w / 2)), want(got.size());
    for (auto& v : in) v = rng.normal();
    std::vector<uint32_t> win(got.size());
    maxpool2d_forward(in.data(), c, h, w, got.data(), win.data());
    oracle::naive_maxpool2(in.data(), c, h, w, want.data());
    for (size_t i = 0; i < got.size(); ++i) REQUIRE(got[i] == want[i]);
    // winners point at the max
    for (size_t ci = 0; ci < c; ++ci)
        for (size_t i = 0; i < (h / 2) * (w / 2); ++i)
            REQUIRE(in[ci * h * w + win[ci * (h / 2) * (w / 2) + i]] ==
                    got[ci * (h / 2) * (w / 2) + i]);

    // all-equal window: the winner is the top-left element
    std::vector<double> flat(1 * 2 * 2, 7.0);
    double out1;
    uint32_t win1;
    maxpool2d_forward(flat.data(), 1, 2, 2, &out1, &win1);
    REQUIRE(out1 == 7.0);
    REQUIRE(win1 == 0);

    std::vector<double> tie = {1.0, 5.0, 5.0, 0.0};  // row-major 2x2
    maxpool2d_forward(tie.data(), 1, 2, 2, &out1, &win1);
    REQUIRE(win1 == 1);  // first 5 in scan order

    REQUIRE_THROWS_AS(maxpool2d_forward(tie.data(), 1, 1, 4, &out1, &win1), ParameterError);
}

TEST_CASE("dense_forward matches the definition") {
    Rng rng(23);
    size_t k = 7, n = 13;
    std::vector<double> x(n), w(k * n), b(k), got(k), want(k);
    for (auto& v : x) v = rng.normal();
    for (auto& v : w) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    dense_forward(x.data(), w.data(), b.data(), k, n, got.data());
    oracle::naive_dense(x.data(), w.data(), b.data(), k, n, want.data());
    for (size_t i = 0; i < k; ++i) REQUIRE(got[i] == Catch::Approx(want[i]).margin(1e-12));
}

TEST_CASE("softmax cross-entropy has the textbook value and gradient") {
    Tensor<double> z({3});
    z.data = {0.0, 0.0, 0.0};
    Tensor<double> dz;
    double loss = softmax_cross_entropy(z, 1, &dz);
    REQUIRE(loss == Catch::Approx(std::log(3.0)).margin(1e-12));
    REQUIRE(dz.data[0] == Catch::Approx(1.0 / 3.0).margin(1e-12));
    REQUIRE(dz.data[1] == Catch::Approx(-2.0 / 3.0).margin(1e-12));
    REQUIRE(dz.data[2] == Catch::Approx(1.0 / 3.0).margin(1e-12));

    // finite-difference check of the logit gradient
    Rng rng(31);
    Tensor<double> zr({5});
    for (auto& v : zr.data) v = rng.normal();
    Tensor<double> g;
    softmax_cross_entropy(zr, 3, &g);
    for (size_t i = 0; i < 5; ++i) {
        Tensor<double> zp = zr, zm = zr;
        zp.data[i] += 1e-6;
        zm.data[i] -= 1e-6;
        double fd = (softmax_cross_entropy(zp, 3) - softmax_cross_entropy(zm, 3)) / 2e-6;
        REQUIRE(g.data[i] == Catch::Approx(fd).margin(1e-8));
    }
    // very large logits stay finite
    Tensor<double> big({3});
    big.data = {1000.0, -1000.0, 999.0};
    REQUIRE(std::isfinite(softmax_cross_entropy(big, 2)));
    REQUIRE_THROWS_AS(softmax_cross_entropy(big, 3), ParameterError);
}

TEST_CASE("analytic gradients match central finite differences on the full network") {
    NetworkSpec spec = reduced_spec();
    NetworkState<double> net = initialize_network<double>(spec, 5);
    std::vector<float> img = random_image(16, 16, 6);
    ImageSet set;
    set.height = 16;
    set.width = 16;
    set.add(img.data(), 2);

    NetworkState<double> grads = make_zero_state<double>(spec);
    loss_and_grad(net, set, {0}, 0.0, grads);

    const double h = 1e-5;
    auto wt = net.tensors();
    auto gt = grads.tensors();
    size_t checked = 0;
    double worst = 0.0;
    Rng pick(77);
    for (size_t s = 0; s < wt.size(); ++s) {
        size_t n = wt[s]->numel();
        size_t take = std::min<size_t>(n, 16);
        for (size_t q = 0; q < take; ++q) {
            size_t j = pick.index(n);
            double keep = wt[s]->data[j];
            wt[s]->data[j] = keep + h;
            double lp = net_loss(net, img.data(), 2, 0.0);
            wt[s]->data[j] = keep - h;
            double lm = net_loss(net, img.data(), 2, 0.0);
            wt[s]->data[j] = keep;
            double fd = (lp - lm) / (2.0 * h);
            double an = gt[s]->data[j];
            double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
            worst = std::max(worst, rel);
            ++checked;
        }
    }
    REQUIRE(checked >= 100);
    REQUIRE(worst <= 1e-4);
}

TEST_CASE("L1 term adds exactly lambda * sum |w| and its subgradient") {
    NetworkSpec spec = reduced_spec();
    NetworkState<double> net = initialize_network<double>(spec, 9);
    std::vector<float> img = random_image(16, 16, 10);
    ImageSet set;
    set.height = 16;
    set.width = 16;
    set.add(img.data(), 0);

    NetworkState<double> g0 = make_zero_state<double>(spec);
    NetworkState<double> g1 = make_zero_state<double>(spec);
    auto s0 = loss_and_grad(net, set, {0}, 0.0, g0);
    double lambda = 0.001;
    auto s1 = loss_and_grad(net, set, {0}, lambda, g1);

    size_t li = l1_layer_index(spec);
    double wsum = 0.0;
    for (double v : net.fc[li].w.data) wsum += std::abs(v);
    REQUIRE(s1.loss - s0.loss == Catch::Approx(lambda * wsum).epsilon(1e-9));

    for (size_t j = 0; j < net.fc[li].w.numel(); ++j) {
        double dw = g1.fc[li].w.data[j] - g0.fc[li].w.data[j];
        double sign = net.fc[li].w.data[j] > 0 ? 1.0 : (net.fc[li].w.data[j] < 0 ? -1.0 : 0.0);
        REQUIRE(dw == Catch::Approx(lambda * sign).margin(1e-12));
    }
    // other layers untouched
    for (size_t j = 0; j < net.fc[0].w.numel(); ++j)
        REQUIRE(g1.fc[0].w.data[j] == g0.fc[0].w.data[j]);
}

TEST_CASE("adam_step follows the update formula") {
    NetworkSpec spec;
    spec.input_h = 8;
    spec.input_w = 8;
    spec.conv_channels = {2};
    spec.fc_widths = {3};
    NetworkState<double> net = initialize_network<double>(spec, 1);
    NetworkState<double> grads = make_zero_state<double>(spec);
    Rng rng(2);
    for (auto* t : grads.tensors())
        for (auto& v : t->data) v = rng.normal();

    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    AdamState<double> opt = AdamState<double>::make(spec);

    double w0 = net.conv[0].w.data[5];
    double g = grads.conv[0].w.data[5];
    adam_step(net, grads, opt, cfg);
    // after one step the bias-corrected update is lr * g / (|g| + eps)
    double want = w0 - 0.01 * g / (std::sqrt(g * g) + 1e-8);
    REQUIRE(net.conv[0].w.data[5] == Catch::Approx(want).epsilon(1e-9));
    REQUIRE(opt.t == 1);

    // second step with the same gradient: track the reference recurrence
    double m1 = (1 - 0.9) * g;
    double v1 = (1 - 0.999) * g * g;
    double m2 = 0.9 * m1 + 0.1 * g;
    double v2 = 0.999 * v1 + 0.001 * g * g;
    double w2 = want - 0.01 * (m2 / (1 - 0.9 * 0.9)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
    adam_step(net, grads, opt, cfg);
    REQUIRE(net.conv[0].w.data[5] == Catch::Approx(w2).epsilon(1e-9));
}

TEST_CASE("initialization is seeded and the spec validates") {
    NetworkSpec spec = reduced_spec();
    auto a = initialize_network<float>(spec, 42);
    auto b = initialize_network<float>(spec, 42);
    auto c = initialize_network<float>(spec, 43);
    REQUIRE(a.conv[0].w.data == b.conv[0].w.data);
    REQUIRE(a.fc[0].w.data == b.fc[0].w.data);
    REQUIRE(a.conv[0].w.data != c.conv[0].w.data);
    for (auto* t : {&a.conv[0].b, &a.conv[1].b, &a.fc[0].b, &a.fc[1].b})
        for (float v : t->data) REQUIRE(v == 0.0f);
    // He-uniform bounds
    double lim = std::sqrt(6.0 / 9.0);
    for (float v : a.conv[0].w.data) REQUIRE(std::abs(v) <= lim);

    NetworkSpec bad = spec;
    bad.input_h = 18;  // not divisible by 4
    REQUIRE_THROWS_AS(bad.validate(), ParameterError);
    NetworkSpec def;
    REQUIRE(def.flatten_size() == 512);
    REQUIRE(def.n_classes() == 3);
    def.validate();
    NetworkState<float> full = make_zero_state<float>(def);
    // parameter count of the standard classifier
    size_t n = full.n_params();
    REQUIRE(n == (32 * 9 + 32) + (64 * 32 * 9 + 64) + (64 * 64 * 9 + 64) +
                     (128 * 64 * 9 + 128) + (32 * 128 * 9 + 32) + (300 * 512 + 300) +
                     (100 * 300 + 100) + (3 * 100 + 3));
}

TEST_CASE("argmax prediction breaks ties toward the lowest index") {
    Tensor<float> z({4});
    z.data = {0.5f, 2.0f, 2.0f, 1.0f};
    REQUIRE(predicted_class(z) == 1);
    float flat[3] = {1.0f, 1.0f, 1.0f};
    REQUIRE(argmax_lowest(flat, 3) == 0);
}

TEST_CASE("training separates a toy problem deterministically") {
    NetworkSpec spec;
    spec.input_h = 8;
    spec.input_w = 8;
    spec.conv_channels = {4};
    spec.fc_widths = {8, 2};
    ImageSet train_set, test_set;
    train_set.height = train_set.width = 8;
    test_set.height = test_set.width = 8;
    Rng rng(17);
    for (int i = 0; i < 24; ++i) {
        std::vector<float> img(64);
        int label = i % 2;
        for (auto& v : img)
            v = static_cast<float>((label ? 0.75 : 0.25) + 0.05 * rng.normal());
        (i < 16 ? train_set : test_set).add(img.data(), label);
    }
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 20;
    cfg.learning_rate = 0.01;
    cfg.seed = 3;
    cfg.l1_lambda = 0.0;

    NetworkState<float> net = initialize_network<float>(spec, 11);
    TrainHistory hist = train(net, train_set, test_set, cfg);
    REQUIRE(hist.epochs.size() == 20);
    REQUIRE(hist.epochs.back().train_loss < hist.epochs.front().train_loss);
    REQUIRE(hist.epochs.back().test_accuracy == 1.0);
    for (const auto& es : hist.epochs) REQUIRE(es.evaluated);

    NetworkState<float> net2 = initialize_network<float>(spec, 11);
    TrainHistory hist2 = train(net2, train_set, test_set, cfg);
    auto ta = net.tensors();
    auto tb = net2.tensors();
    for (size_t i = 0; i < ta.size(); ++i) REQUIRE(ta[i]->data == tb[i]->data);
    for (size_t e = 0; e < hist.epochs.size(); ++e) {
        REQUIRE(hist.epochs[e].train_loss == hist2.epochs[e].train_loss);
        REQUIRE(hist.epochs[e].test_accuracy == hist2.epochs[e].test_accuracy);
    }

    // A sparser eval cadence must not perturb training and must mark the
    // epochs it skipped.
    cfg.eval_every = 6;
    NetworkState<float> net3 = initialize_network<float>(spec, 11);
    TrainHistory hist3 = train(net3, train_set, test_set, cfg);
    auto tc = net3.tensors();
    for (size_t i = 0; i < ta.size(); ++i) REQUIRE(ta[i]->data == tc[i]->data);
    for (size_t e = 0; e < hist3.epochs.size(); ++e) {
        bool expect_eval = (e + 1) % 6 == 0 || e + 1 == hist3.epochs.size();
        REQUIRE(hist3.epochs[e].evaluated == expect_eval);
        REQUIRE(hist3.epochs[e].train_loss == hist.epochs[e].train_loss);
        if (expect_eval) {
            REQUIRE(hist3.epochs[e].test_accuracy == hist.epochs[e].test_accuracy);
        } else {
            REQUIRE(hist3.epochs[e].test_accuracy == 0.0);
        }
    }
    cfg.eval_every = 0;
    REQUIRE_THROWS_AS(cfg.validate(), ParameterError);
    cfg.eval_every = 1;

    EvalResult ev = evaluate(net, test_set);
    REQUIRE(ev.accuracy == 1.0);
    size_t diag = ev.confusion[0] + ev.confusion[3];
    REQUIRE(diag == test_set.size());
    for (size_t i = 0; i < test_set.size(); ++i) {
        float p0 = ev.probabilities[i * 2], p1 = ev.probabilities[i * 2 + 1];
        REQUIRE(p0 + p1 == Catch::Approx(1.0f).margin(1e-5));
    }
}
