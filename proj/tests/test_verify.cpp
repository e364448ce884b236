#include <doctest.h>

#include "arprl/rng.hpp"
#include "arprl/verify.hpp"

using namespace arprl;

TEST_CASE("gradient suite passes end to end at reduced instance count") {
    const SuiteResult suite = run_gradient_suite(2024, 4);
    for (const auto& c : suite.checks) {
        INFO(c.name, ": ", c.detail);
        CHECK(c.passed);
    }
}

TEST_CASE("mi oracle suite without the slow estimator section") {
    const SuiteResult suite = run_mi_oracle_suite(2024, 40, /*with_gaussian=*/false);
    for (const auto& c : suite.checks) {
        INFO(c.name, ": ", c.detail);
        CHECK(c.passed);
    }
}

TEST_CASE("discrete bounds suite") {
    const SuiteResult suite = run_bounds_discrete_suite(2024, 40);
    for (const auto& c : suite.checks) {
        INFO(c.name, ": ", c.detail);
        CHECK(c.passed);
    }
}

TEST_CASE("kink guard rejects instances that sit on a relu corner") {
    Param w(Mat(1, 1, {0.0})); // relu input exactly at the kink
    const FdCheck fd = check_gradients({&w}, [&](Tape& t) { return mean_all(relu(t.param(w))); });
    CHECK(fd.rejected);
}

TEST_CASE("gradient checker flags a mismatched derivative") {
    // the analytic pass sees v^2 (slope 2v); the finite-difference rebuilds
    // see 0.5 v^2 (slope v), so the checker must report the disagreement
    Param v(Mat(1, 1, {0.7}));
    bool analytic_pass = true;
    const FdCheck broken = check_gradients({&v}, [&](Tape& t) {
        if (analytic_pass) {
            analytic_pass = false;
            return mean_all(mul(t.param(v), t.param(v)));
        }
        Mat half(1, 1, {0.5 * v.value.v[0]});
        return mean_all(mul(t.param(v), t.constant(half)));
    });
    CHECK_FALSE(broken.rejected);
    CHECK(broken.max_rel_err > 1e-4);
}
