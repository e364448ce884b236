#pragma once

#include <functional>

#include "arprl/mi.hpp"
#include "arprl/nn.hpp"
#include "arprl/tensor.hpp"

namespace arprl {

enum class AttackObjective { task_loss, mi_loss };

struct AttackConfig {
    double epsilon = 0.01;       // l-inf budget
    int steps = 10;
    double step_fraction = 0.1;  // per-step size = step_fraction * epsilon
    AttackObjective objective = AttackObjective::task_loss;

    void validate() const;
};

// Builds a scalar loss from the differentiable input leaf.
using LossFn = std::function<Tensor(Tape&, const Tensor&)>;

// Iterated signed-gradient steps from x, projected back into the eps-ball
// after every step: ascends a task loss, descends an MI objective. The
// returned perturbation satisfies ||x' - x||_inf <= eps exactly.
Mat pgd_attack(const LossFn& loss_fn, const Mat& x, const AttackConfig& cfg);

struct WorstCaseConfig {
    AttackConfig attack{0.01, 10, 0.1, AttackObjective::mi_loss};
    int critic_steps = 10;      // ascent steps on the critic per round
    double critic_lr = 1e-3;
    double clip_norm = 10.0;
    int rounds = 1;
    bool update_critic = true;  // false freezes the critic (pure search)
};

struct WorstCaseResult {
    Mat x_adv;
    double l2_at_adv = 0.0;    // MINE objective at x_adv, final critic
    double l2_at_clean = 0.0;  // MINE objective at the unperturbed batch, same critic
    double max_linf = 0.0;     // largest |x_adv - x| entry, for ball-containment checks
};

// Alternating minimization over the empirical batch: per round, gradient
// ascent on the critic at the current perturbations, then PGD descent on
// the perturbations with the critic frozen. Candidate perturbations are
// kept only when they lower the objective, so l2_at_adv <= l2_at_clean
// always holds under the final critic.
WorstCaseResult worst_case_mi_search(Mlp& t, Mlp& f, const Batch& batch,
                                     const WorstCaseConfig& cfg);

} // namespace arprl
