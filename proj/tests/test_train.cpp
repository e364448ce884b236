#include <doctest.h>

#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "arprl/mi.hpp"
#include "arprl/rng.hpp"
#include "arprl/train.hpp"

using namespace arprl;

namespace {

TrainConfig tiny_config(double alpha, double beta, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = beta;
    cfg.seed = seed;
    cfg.batch_size = 20;
    cfg.global_epochs = 2;
    cfg.local_steps = 3;
    cfg.pgd_steps = 3;
    return cfg;
}

} // namespace

TEST_CASE("identical configs produce identical epoch logs") {
    const Dataset d = gen_circles(60, 5);
    const TrainConfig cfg = tiny_config(0.1, 0.5, 42);
    const TrainResult a = train(d, cfg);
    const TrainResult b = train(d, cfg);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].l1 == b.log[i].l1);
        CHECK(a.log[i].l2 == b.log[i].l2);
        CHECK(a.log[i].l3 == b.log[i].l3);
        CHECK(a.log[i].objective == b.log[i].objective);
    }
}

TEST_CASE("privacy-net phase does not increase its loss on the batch") {
    const Dataset d = gen_circles(60, 6);
    int events = 0;
    train(d, tiny_config(0.2, 0.4, 7), "", [&](const BatchEvent& ev) {
        CHECK(ev.l1_after_inner <= ev.l1_before_inner + 1e-6);
        ++events;
    });
    CHECK(events > 0);
}

TEST_CASE("with full privacy weight the representation step pushes L1 up") {
    const Dataset d = gen_circles(60, 8);
    int events = 0;
    train(d, tiny_config(1.0, 0.0, 9), "", [&](const BatchEvent& ev) {
        CHECK(ev.l1_after_theta >= ev.l1_before_theta - 1e-6);
        ++events;
    });
    CHECK(events > 0);
}

TEST_CASE("attack stays inside the ball and never raises the frozen-critic objective") {
    const Dataset d = gen_circles(60, 10);
    TrainConfig cfg = tiny_config(0.1, 0.5, 11);
    cfg.epsilon = 0.02;
    train(d, cfg, "", [&](const BatchEvent& ev) {
        CHECK(ev.attack_linf <= cfg.epsilon + 1e-12);
        CHECK(ev.l2_adv <= ev.l2_clean + 1e-9);
    });
}

TEST_CASE("zero privacy and robustness weights contribute nothing to the representation step") {
    const Dataset d = gen_circles(30, 12);
    ModelBundle b = build_default_networks(DatasetKind::toy, 2, 2, 2);
    init_bundle(b, 13);
    Rng rng(14);
    Batch batch = make_batch(d.rows(d.train_idx), d.labels_at(d.train_idx),
                             d.attrs_at(d.train_idx), 2, rng);

    auto f_grads = [&](bool full_objective) {
        Tape tape;
        Tensor l3 = js_objective_l3(tape, b.h, b.f, batch);
        Tensor loss = l3;
        if (full_objective) {
            Tensor l1 = privacy_loss_l1(tape, b.g, b.f, batch);
            Tensor l2 = mine_objective_l2(tape, b.t, b.f, batch);
            loss = add(add(scale(l1, 0.0), scale(l2, 0.0)), scale(l3, 1.0));
        }
        b.zero_grads();
        tape.backward(loss);
        std::vector<double> g;
        for (Param* p : b.f.params())
            for (double v : p->grad.v) g.push_back(v);
        b.zero_grads();
        return g;
    };
    const auto with_terms = f_grads(true);
    const auto without = f_grads(false);
    REQUIRE(with_terms.size() == without.size());
    for (std::size_t i = 0; i < with_terms.size(); ++i) CHECK(with_terms[i] == without[i]);
}

TEST_CASE("invalid configs are rejected before any training") {
    const Dataset d = gen_circles(30, 15);
    TrainConfig cfg = tiny_config(0.7, 0.7, 1);
    CHECK_THROWS_AS(train(d, cfg), std::invalid_argument);
}

TEST_CASE("non-finite inputs abort with the offending term and epoch") {
    Dataset d = gen_circles(30, 16);
    d.x.v[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(train(d, tiny_config(0.1, 0.5, 17)), doctest::Contains("epoch 0"),
                         std::runtime_error);
}

TEST_CASE("training artifacts are persisted") {
    const Dataset d = gen_circles(60, 18);
    TrainConfig cfg = tiny_config(0.1, 0.5, 19);
    cfg.global_epochs = 10;
    const std::string dir = "train_artifacts_test";
    std::filesystem::remove_all(dir);
    const TrainResult res = train(d, cfg, dir);
    CHECK(std::filesystem::exists(dir + "/training_log.csv"));
    CHECK(std::filesystem::exists(dir + "/ckpt-10.txt"));
    CHECK(std::filesystem::exists(dir + "/ckpt-final.txt"));

    std::ifstream log(dir + "/training_log.csv");
    std::string header;
    std::getline(log, header);
    CHECK(header == "epoch,L1,L2,L3,objective");
    int rows = 0;
    std::string line;
    while (std::getline(log, line))
        if (!line.empty()) ++rows;
    CHECK(rows == cfg.global_epochs);
    CHECK(res.log.size() == static_cast<std::size_t>(cfg.global_epochs));
    std::filesystem::remove_all(dir);
}

TEST_CASE("task head trains when lambda is positive") {
    const Dataset d = gen_circles(60, 30);
    TrainConfig cfg = tiny_config(0.0, 0.2, 31);
    cfg.lambda = 0.5;
    const TrainResult res = train(d, cfg);
    REQUIRE(res.bundle.task_head.has_value());
    for (double w : res.bundle.task_head->weights[0].value.v) CHECK(std::isfinite(w));
    // task-agnostic mode must not create a head
    TrainConfig plain = tiny_config(0.0, 0.2, 31);
    CHECK_FALSE(train(d, plain).bundle.task_head.has_value());
}

TEST_CASE("alpha-beta tuning probes in order and respects the ceiling") {
    const Dataset d = gen_circles(100, 20);
    TrainConfig base = tiny_config(0.0, 0.0, 21);
    base.global_epochs = 4;

    CHECK_THROWS_WITH_AS(tune_alpha_beta(d, 1.5, base), doctest::Contains("ceiling"),
                         std::runtime_error);

    const TuneResult res = tune_alpha_beta(d, 0.8, base, 0.2, 1);
    REQUIRE(res.probes.size() >= 4);
    CHECK(res.probes[0].stage == "ceiling");
    CHECK(res.probes[1].stage == "probe");
    CHECK(res.probes[2].stage == "probe");
    CHECK(res.probes[3].stage == "probe");
    CHECK(res.probes[1].alpha == doctest::Approx(0.1));
    CHECK(res.probes[2].alpha == doctest::Approx(0.15));
    CHECK(res.probes[3].alpha == doctest::Approx(0.05));
    // any refinement rows come after all three probes
    for (std::size_t i = 4; i < res.probes.size(); ++i)
        CHECK(res.probes[i].stage == "refine");
    CHECK(res.alpha >= 0.0);
    CHECK(res.beta >= 0.0);
}
