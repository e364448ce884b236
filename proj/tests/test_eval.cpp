#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "arprl/eval.hpp"
#include "arprl/rng.hpp"
#include "arprl/train.hpp"

using namespace arprl;

namespace {

// small trained-ish bundle shared across cases
const Dataset& toy_data() {
    static const Dataset d = gen_circles(400, 3);
    return d;
}

const ModelBundle& toy_bundle() {
    static const ModelBundle b = [] {
        TrainConfig cfg;
        cfg.alpha = 0.0;
        cfg.beta = 0.5;
        cfg.batch_size = 64;
        cfg.global_epochs = 60;
        cfg.local_steps = 3;
        cfg.pgd_steps = 3;
        cfg.seed = 9;
        return train(toy_data(), cfg).bundle;
    }();
    return b;
}

CriticEstimatorConfig fast_estimator() {
    CriticEstimatorConfig cfg;
    cfg.steps = 150;
    cfg.batch_size = 64;
    cfg.eval_permutations = 4;
    return cfg;
}

} // namespace

TEST_CASE("advantage from prediction counts") {
    // 45/50 hits given u=1 and 10/50 false alarms given u=0: |0.9 - 0.2| = 0.7
    std::vector<int> pred, attr;
    for (int i = 0; i < 50; ++i) {
        attr.push_back(1);
        pred.push_back(i < 45 ? 1 : 0);
    }
    for (int i = 0; i < 50; ++i) {
        attr.push_back(0);
        pred.push_back(i < 10 ? 1 : 0);
    }
    CHECK(advantage_from_predictions(pred, attr) == doctest::Approx(0.7).epsilon(1e-12));

    // perfect adversary
    CHECK(advantage_from_predictions(attr, attr) == doctest::Approx(1.0));
    // constant adversary is random guessing
    std::vector<int> constant(attr.size(), 1);
    CHECK(advantage_from_predictions(constant, attr) == doctest::Approx(0.0));

    CHECK_THROWS_AS(advantage_from_predictions({0, 1}, {0, 2}), std::invalid_argument);
    CHECK_THROWS_AS(advantage_from_predictions({0, 1}, {1, 1}), std::runtime_error);
}

TEST_CASE("privacy cap formula") {
    CHECK(theorem5_cap(1.0) == doctest::Approx(1.0 - 1.0 / (2.0 * std::log2(6.0))).epsilon(1e-12));
    CHECK(theorem5_cap(1.0) == doctest::Approx(0.80657).epsilon(1e-4));
    CHECK(theorem5_cap(0.0) == 1.0);
    CHECK(theorem5_cap(1e-12) == doctest::Approx(1.0).epsilon(1e-9));
    // estimates above one bit clamp to the binary-entropy ceiling
    CHECK(theorem5_cap(3.0) == theorem5_cap(1.0));
}

TEST_CASE("spectral lipschitz bound") {
    Mlp single = make_mlp({2, 1}, Activation::relu, OutputKind::none);
    single.weights[0].value.v = {3.0, 4.0};
    CHECK(estimate_lipschitz(single) == doctest::Approx(5.0).epsilon(1e-9));

    Mlp eye = make_mlp({3, 3, 3}, Activation::relu, OutputKind::none);
    for (auto& w : eye.weights)
        for (Index i = 0; i < 3; ++i) w.value.at(i, i) = 1.0;
    CHECK(estimate_lipschitz(eye) == doctest::Approx(1.0).epsilon(1e-9));

    // never below the sampled difference quotient
    Mlp net = make_mlp({3, 8, 1}, Activation::relu, OutputKind::none);
    init_params(net, 77);
    const double bound = estimate_lipschitz(net);
    Rng rng(78);
    double best_ratio = 0.0;
    for (int k = 0; k < 10000; ++k) {
        Mat a(1, 3), b(1, 3);
        for (Index j = 0; j < 3; ++j) {
            a.at(0, j) = rng.uniform(-3.0, 3.0);
            b.at(0, j) = rng.uniform(-3.0, 3.0);
        }
        Tape t;
        const double fa = net.forward(t, t.constant(a)).data()[0];
        const double fb = net.forward(t, t.constant(b)).data()[0];
        double dist = 0.0;
        for (Index j = 0; j < 3; ++j) {
            const double dv = a.at(0, j) - b.at(0, j);
            dist += dv * dv;
        }
        dist = std::sqrt(dist);
        if (dist > 1e-9) best_ratio = std::max(best_ratio, std::abs(fa - fb) / dist);
    }
    CHECK(bound >= best_ratio);
}

TEST_CASE("discrete oracle: independent and deterministic joints") {
    // z independent of u, uniform everywhere
    DiscreteJoint3 indep(2);
    for (Index z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y)
            for (int u = 0; u < 2; ++u) indep.at(z, y, u) = 0.125;
    const BoundReport r1 = check_bounds_discrete_oracle(indep, {-0.5, 0.5});
    CHECK(r1.infer_acc == doctest::Approx(0.5));
    CHECK(r1.h_u_z_bits == doctest::Approx(1.0));
    for (const auto& c : r1.checks) {
        CHECK(c.exact);
        if (c.name == "theorem5_inference_cap") {
            CHECK(c.rhs == doctest::Approx(0.80657).epsilon(1e-4));
            CHECK(c.holds);
        }
    }

    // z determines u
    DiscreteJoint3 det(2);
    for (Index z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y) det.at(z, y, static_cast<int>(z)) = 0.25;
    const BoundReport r2 = check_bounds_discrete_oracle(det, {-0.5, 0.5});
    CHECK(r2.infer_acc == doctest::Approx(1.0));
    CHECK(r2.h_u_z_bits == doctest::Approx(0.0));
    for (const auto& c : r2.checks)
        if (c.name == "theorem5_inference_cap") {
            CHECK(c.rhs == doctest::Approx(1.0));
            CHECK(c.holds);
        }

    CHECK_THROWS_AS(check_bounds_discrete_oracle(DiscreteJoint3(9), std::vector<double>(9, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("discrete oracle: seeded random joints satisfy the exact inequalities") {
    Rng rng(101);
    for (int k = 0; k < 25; ++k) {
        const Index nz = 2 + static_cast<Index>(rng.below(7));
        const DiscreteJoint3 joint = random_joint3(nz, rng);
        std::vector<double> embed(static_cast<std::size_t>(nz));
        for (std::size_t i = 0; i < embed.size(); ++i)
            embed[i] = -1.0 + 2.0 * static_cast<double>(i + 1) / static_cast<double>(nz + 1);
        const BoundReport r = check_bounds_discrete_oracle(joint, embed);
        for (const auto& c : r.checks) {
            if (c.name == "theorem5_inference_cap") CHECK(c.holds);
            if (c.name == "theorem3_conditional_risk") CHECK(c.holds);
        }
    }
}

TEST_CASE("probes reach the expected accuracies on an informative toy bundle") {
    const ModelBundle& b = toy_bundle();
    const Dataset& d = toy_data();
    AttackConfig attack{0.01, 3, 0.1, AttackObjective::task_loss};
    const MetricsReport m = evaluate_metrics(b, d, attack, 5);
    CHECK(m.test_acc >= 0.85); // circles separate easily without privacy pressure
    CHECK(m.infer_acc >= 0.9);
    CHECK(m.robust_acc <= m.test_acc + 0.02);
    CHECK(m.advantage >= 0.0);
    CHECK(m.advantage <= 1.0);
    CHECK(m.infer_gap == doctest::Approx(m.infer_acc - m.majority_rate));
}

TEST_CASE("robust accuracy equals test accuracy exactly at zero budget") {
    const ModelBundle& b = toy_bundle();
    const Dataset& d = toy_data();
    AttackConfig attack{0.0, 10, 0.1, AttackObjective::task_loss};
    const MetricsReport m = evaluate_metrics(b, d, attack, 6);
    CHECK(m.robust_acc == m.test_acc);
}

TEST_CASE("degenerate probe targets are rejected") {
    Dataset d = gen_circles(30, 40);
    for (auto& u : d.u) u = 0;
    CHECK_THROWS_AS(fit_probe_classifier(toy_bundle(), d, ProbeTarget::attribute, 1),
                    std::invalid_argument);
}

TEST_CASE("constant representations give near-zero vulnerability") {
    ModelBundle frozen = build_default_networks(DatasetKind::toy, 2, 2, 2);
    // zero weights: z is constant, so both MI estimates sit at the noise floor
    const Dataset& d = toy_data();
    AttackConfig attack{0.01, 3, 0.1, AttackObjective::mi_loss};
    const RvEstimate rv = estimate_rv(frozen, d, attack, 7, fast_estimator());
    CHECK(std::abs(rv.mi_clean) < 0.1);
    CHECK(std::abs(rv.mi_adv) < 0.1);
    CHECK(std::abs(rv.rv) < 0.1);
}

TEST_CASE("estimator-mode bound report carries all four checks") {
    const ModelBundle& b = toy_bundle();
    const Dataset& d = toy_data();
    AttackConfig attack{0.01, 3, 0.1, AttackObjective::task_loss};
    const BoundReport r = check_theorem_bounds(b, d, attack, 8, fast_estimator());
    REQUIRE(r.checks.size() == 4);
    for (const auto& c : r.checks) CHECK_FALSE(c.exact);
    CHECK(r.rep_norm_bound > 0.0);
    CHECK(r.lipschitz > 0.0);
    CHECK(r.h_u_z_bits >= 0.0);
    // the three lower bounds hold comfortably on a real bundle (rhs far below)
    for (const auto& c : r.checks)
        if (c.name != "theorem5_inference_cap") CHECK(c.holds);

    const std::string csv = "bounds_test.csv", txt = "bounds_test.txt";
    write_bound_report(r, csv, txt);
    std::ifstream is(csv);
    std::string header;
    std::getline(is, header);
    CHECK(header.find("theorem5_inference_cap_lhs") != std::string::npos);
    std::remove(csv.c_str());
    std::remove(txt.c_str());
}

TEST_CASE("projection export: 2-dim representations project as a rotation") {
    const ModelBundle& b = toy_bundle();
    const Dataset& d = toy_data();
    const std::string path = "proj_test.csv";
    export_projection(b, d, path);

    // reload both files and compare pairwise distances
    auto load_csv = [](const std::string& p, int cols) {
        std::ifstream is(p);
        std::string line;
        std::getline(is, line); // header
        std::vector<std::vector<double>> rows;
        while (std::getline(is, line)) {
            std::vector<double> row;
            std::string cur;
            for (char ch : line + ",") {
                if (ch == ',') {
                    row.push_back(std::stod(cur));
                    cur.clear();
                } else {
                    cur += ch;
                }
            }
            row.resize(static_cast<std::size_t>(cols));
            rows.push_back(row);
        }
        return rows;
    };
    const auto proj = load_csv(path, 2);
    const auto full = load_csv("proj_test_full.csv", 2);
    REQUIRE(proj.size() == full.size());
    for (std::size_t i = 0; i < 40; i += 7)
        for (std::size_t j = i + 3; j < 40; j += 11) {
            auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
                double s = 0.0;
                for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
                return std::sqrt(s);
            };
            CHECK(dist(proj[i], proj[j]) == doctest::Approx(dist(full[i], full[j])).epsilon(1e-9));
        }
    std::remove(path.c_str());
    std::remove("proj_test_full.csv");
}
