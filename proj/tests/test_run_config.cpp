#include <doctest.h>

#include <stdexcept>

#include "arprl/run_config.hpp"

using namespace arprl;

TEST_CASE("full config parses with defaults filled") {
    RunConfig cfg;
    apply_run_config_text(cfg,
                          "# experiment\n"
                          "[data]\n"
                          "kind = circles\n"
                          "n = 1234\n"
                          "[train]\n"
                          "alpha = 0.1\n"
                          "beta = 0.5\n"
                          "epsilon = 0.02\n"
                          "seed = 9\n"
                          "[attack]\n"
                          "steps = 7\n",
                          "inline");
    CHECK(cfg.data_n == 1234);
    CHECK(cfg.train.alpha == 0.1);
    CHECK(cfg.train.beta == 0.5);
    CHECK(cfg.train.epsilon == 0.02);
    CHECK(cfg.train.seed == 9);
    CHECK(cfg.attack.steps == 7);
    CHECK(cfg.train.pgd_steps == 7); // attack schedule shared with training
    // untouched defaults
    CHECK(cfg.train.batch_size == 100);
    CHECK(cfg.train.global_epochs == 50);
    CHECK(cfg.train.local_steps == 10);
    CHECK(cfg.train.lr4 == 1e-3);
}

TEST_CASE("unknown keys and sections are rejected by name") {
    RunConfig cfg;
    CHECK_THROWS_WITH_AS(
        apply_run_config_text(cfg, "[train]\nmomentum = 0.9\n", "inline"),
        doctest::Contains("momentum"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(apply_run_config_text(cfg, "[optimizer]\nlr = 1\n", "inline"),
                         doctest::Contains("optimizer"), std::invalid_argument);
    CHECK_THROWS_AS(apply_run_config_text(cfg, "alpha = 0.1\n", "inline"),
                    std::invalid_argument); // key outside any section
    CHECK_THROWS_AS(apply_run_config_text(cfg, "[train]\nalpha 0.1\n", "inline"),
                    std::invalid_argument); // missing '='
    CHECK_THROWS_WITH_AS(apply_run_config_text(cfg, "[train]\nalpha = fast\n", "inline"),
                         doctest::Contains("alpha"), std::invalid_argument);
}

TEST_CASE("invariants are validated before any compute") {
    RunConfig cfg;
    CHECK_THROWS_WITH_AS(
        apply_run_config_text(cfg, "[train]\nalpha = 0.7\nbeta = 0.7\n", "inline"),
        doctest::Contains("alpha + beta"), std::invalid_argument);
    RunConfig cfg2;
    CHECK_THROWS_AS(apply_run_config_text(cfg2, "[attack]\nstep_fraction = 2.0\n", "inline"),
                    std::invalid_argument);
}

TEST_CASE("render and reparse round-trips every field") {
    RunConfig cfg;
    apply_run_config_text(cfg,
                          "[data]\nkind = tabular\nn = 777\nseed = 3\n"
                          "[model]\nlambda = 0.25\n"
                          "[train]\nalpha = 0.05\nbeta = 0.475\nlr4 = 0.002\n"
                          "[attack]\nepsilon = 0.03\n"
                          "[eval]\nbounds = true\nestimator_steps = 500\n",
                          "inline");
    RunConfig back;
    apply_run_config_text(back, render_run_config(cfg), "rendered");
    CHECK(back.data_kind == cfg.data_kind);
    CHECK(back.data_n == cfg.data_n);
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.train.alpha == cfg.train.alpha);
    CHECK(back.train.beta == cfg.train.beta);
    CHECK(back.train.lr4 == cfg.train.lr4);
    CHECK(back.attack.epsilon == cfg.attack.epsilon);
    CHECK(back.eval_bounds == cfg.eval_bounds);
    CHECK(back.estimator_steps == cfg.estimator_steps);
}
