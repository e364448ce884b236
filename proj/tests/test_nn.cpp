#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "arprl/nn.hpp"
#include "arprl/rng.hpp"

using namespace arprl;

TEST_CASE("default architectures match the per-dataset table") {
    const ModelBundle toy = build_default_networks(DatasetKind::toy, 2, 2, 2);
    CHECK(toy.f.sizes == std::vector<int>{2, 10, 2});
    CHECK(toy.g.sizes == std::vector<int>{2, 5, 2});
    CHECK(toy.t.sizes == std::vector<int>{2 + 2 + 1, 64, 1});
    CHECK(toy.h.sizes == std::vector<int>{2 + 2 + 1, 64, 1});

    const ModelBundle tab = build_default_networks(DatasetKind::tabular, 14, 2, 2);
    CHECK(tab.f.sizes == std::vector<int>{14, 12, 3});
    CHECK(tab.g.sizes == std::vector<int>{3, 16, 2});
    CHECK(tab.t.sizes == std::vector<int>{14 + 3 + 1, 64, 1});

    // multi-valued attributes widen the privacy head and the critic embedding
    const ModelBundle multi = build_default_networks(DatasetKind::tabular, 14, 7, 2);
    CHECK(multi.g.sizes == std::vector<int>{3, 16, 7});
    CHECK(multi.t.sizes == std::vector<int>{14 + 3 + 7, 64, 1});

    CHECK_THROWS_AS(build_default_networks(DatasetKind::toy, 0, 2, 2), std::invalid_argument);
}

TEST_CASE("init is deterministic, bounded and zero-biased") {
    Mlp a = make_mlp({4, 8, 3}, Activation::relu, OutputKind::none);
    Mlp b = make_mlp({4, 8, 3}, Activation::relu, OutputKind::none);
    init_params(a, 42);
    init_params(b, 42);
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        for (std::size_t k = 0; k < a.weights[l].value.v.size(); ++k)
            CHECK(a.weights[l].value.v[k] == b.weights[l].value.v[k]);
        const double bound =
            std::sqrt(6.0 / static_cast<double>(a.sizes[l] + a.sizes[l + 1]));
        for (double w : a.weights[l].value.v) CHECK(std::abs(w) <= bound);
        for (double bias : a.biases[l].value.v) CHECK(bias == 0.0);
    }
}

TEST_CASE("sgd step moves against or along the gradient then clears it") {
    Mlp net = make_mlp({1, 1}, Activation::none, OutputKind::none);
    net.weights[0].value.v[0] = 1.0;
    net.weights[0].grad.v[0] = 2.0;
    sgd_step(net, 0.1, StepDirection::descend);
    CHECK(net.weights[0].value.v[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(net.weights[0].grad.v[0] == 0.0);

    net.weights[0].value.v[0] = 1.0;
    net.weights[0].grad.v[0] = 2.0;
    sgd_step(net, 0.1, StepDirection::ascend);
    CHECK(net.weights[0].value.v[0] == doctest::Approx(1.2).epsilon(1e-15));

    // zero gradients leave parameters untouched
    const double before = net.weights[0].value.v[0];
    sgd_step(net, 0.1, StepDirection::descend);
    CHECK(net.weights[0].value.v[0] == before);
}

TEST_CASE("a small descend step decreases the loss when the gradient is nonzero") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        Rng rng(seed);
        Mlp net = make_mlp({3, 6, 2}, Activation::relu, OutputKind::softmax_logits);
        init_params(net, seed);
        Mat x(8, 3);
        for (auto& v : x.v) v = rng.uniform(-2.0, 2.0);
        std::vector<int> y(8);
        for (auto& t : y) t = static_cast<int>(rng.below(2));

        auto loss_value = [&]() {
            Tape t;
            return cross_entropy_mean(net.forward(t, t.constant(x)), y).scalar();
        };
        const double before = loss_value();
        {
            Tape t;
            Tensor loss = cross_entropy_mean(net.forward(t, t.constant(x)), y);
            t.backward(loss);
        }
        if (grad_norm(net) <= 1e-6) continue;
        sgd_step(net, 1e-6, StepDirection::descend);
        CHECK(loss_value() < before);
    }
}

TEST_CASE("ascend on L equals descend on -L bit for bit") {
    Rng rng(9);
    Mat x(6, 3);
    for (auto& v : x.v) v = rng.uniform(-2.0, 2.0);

    auto run = [&x](StepDirection dir, double sign) {
        Mlp net = make_mlp({3, 5, 1}, Activation::tanh_act, OutputKind::none);
        init_params(net, 123);
        Tape t;
        Tensor loss = scale(mean_all(net.forward(t, t.constant(x))), sign);
        t.backward(loss);
        sgd_step(net, 0.05, dir);
        std::vector<double> out;
        for (Param* p : net.params())
            for (double v : p->value.v) out.push_back(v);
        return out;
    };
    const auto ascend = run(StepDirection::ascend, 1.0);
    const auto descend_neg = run(StepDirection::descend, -1.0);
    REQUIRE(ascend.size() == descend_neg.size());
    for (std::size_t i = 0; i < ascend.size(); ++i) CHECK(ascend[i] == descend_neg[i]);
}

TEST_CASE("gradient clipping caps the global norm") {
    Mlp net = make_mlp({2, 2}, Activation::none, OutputKind::none);
    for (Param* p : net.params())
        for (double& g : p->grad.v) g = 100.0;
    clip_grad_norm(net, 10.0);
    CHECK(grad_norm(net) == doctest::Approx(10.0).epsilon(1e-12));
    // a small gradient is left alone
    for (Param* p : net.params())
        for (double& g : p->grad.v) g = 0.1;
    const double before = grad_norm(net);
    clip_grad_norm(net, 10.0);
    CHECK(grad_norm(net) == before);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    ModelBundle b = build_default_networks(DatasetKind::toy, 2, 2, 2);
    init_bundle(b, 321);
    b.config.alpha = 0.1;
    b.config.beta = 0.5;
    b.config.seed = 77;
    b.task_head = make_mlp({2, 2}, Activation::relu, OutputKind::softmax_logits);
    init_params(*b.task_head, 55);

    const std::string path = "ckpt_roundtrip_test.txt";
    save_checkpoint(b, path);
    const ModelBundle r = load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(r.meta.kind == b.meta.kind);
    CHECK(r.config.alpha == b.config.alpha);
    CHECK(r.config.seed == b.config.seed);
    REQUIRE(r.task_head.has_value());
    auto same = [](const Mlp& x, const Mlp& y) {
        for (std::size_t l = 0; l < x.weights.size(); ++l) {
            for (std::size_t k = 0; k < x.weights[l].value.v.size(); ++k)
                if (x.weights[l].value.v[k] != y.weights[l].value.v[k]) return false;
            for (std::size_t k = 0; k < x.biases[l].value.v.size(); ++k)
                if (x.biases[l].value.v[k] != y.biases[l].value.v[k]) return false;
        }
        return true;
    };
    CHECK(same(r.f, b.f));
    CHECK(same(r.g, b.g));
    CHECK(same(r.t, b.t));
    CHECK(same(r.h, b.h));
    CHECK(same(*r.task_head, *b.task_head));
}

TEST_CASE("train config validation rejects bad weights") {
    TrainConfig cfg;
    cfg.alpha = 0.6;
    cfg.beta = 0.6;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("alpha + beta"),
                         std::invalid_argument);
    cfg = TrainConfig{};
    cfg.lr4 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_NOTHROW(TrainConfig{}.validate());
}
