#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "arprl/tensor.hpp"

namespace arprl {

struct FdCheck {
    double max_rel_err = 0.0;
    Index checked = 0;
    bool rejected = false; // instance too close to a relu kink for central differences
};

// Central-difference gradient oracle. Uses only forward evaluations of the
// rebuilt graph, so it is independent of the backward implementation it
// checks. Relative error has a 1e-7 absolute floor.
FdCheck check_gradients(const std::vector<Param*>& params,
                        const std::function<Tensor(Tape&)>& build_loss, double h = 1e-5,
                        double kink_guard = 2e-4);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SuiteResult {
    std::string suite;
    std::vector<CheckResult> checks;

    bool all_passed() const;
    int passed_count() const;
};

// Finite-difference verification of every differentiable primitive and of
// the composed training losses, `instances` seeded instances each.
SuiteResult run_gradient_suite(std::uint64_t seed, int instances = 20);

// Exact sandwich DV <= MI <= CLUB on random discrete joints, frozen
// closed-form values, and trained-critic accuracy on correlated Gaussians.
SuiteResult run_mi_oracle_suite(std::uint64_t seed, int joints = 100, bool with_gaussian = true);

// Brute-force theorem checks over random finite joints with Bayes-optimal
// adversaries and exhaustively enumerated classifiers.
SuiteResult run_bounds_discrete_suite(std::uint64_t seed, int joints = 100);

void print_suite(const SuiteResult& suite);

} // namespace arprl
