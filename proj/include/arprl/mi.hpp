#pragma once

#include <cstdint>
#include <vector>

#include "arprl/nn.hpp"
#include "arprl/tensor.hpp"

namespace arprl {

class Rng;

// One minibatch as seen by the estimators: inputs, labels, attributes and a
// within-batch row permutation of x serving as the independent negatives.
struct Batch {
    Mat x;                    // (B, d_x)
    std::vector<int> y;       // (B,)
    std::vector<int> u;       // (B,)
    std::vector<Index> perm;  // negatives are x rows reordered by perm
    int num_attr_values = 2;

    Index size() const { return x.rows; }
    Mat xbar() const; // materialized permuted rows
};

// Assembles a batch from dataset rows and draws the negative permutation.
Batch make_batch(const Mat& x, std::vector<int> y, std::vector<int> u, int num_attr_values,
                 Rng& rng);

// attribute embedding fed to the critics: a single 0/1 float for binary
// attributes, one-hot for multi-valued ones
Mat attr_embedding(const std::vector<int>& u, int num_attr_values);

// L1 = mean_i CE(u_i, g(f(x_i))). Differentiable w.r.t. both networks; the
// vCLUB privacy objective reduces to this cross-entropy for the privacy
// net's own updates.
Tensor privacy_loss_l1(Tape& tape, Mlp& g, Mlp& f, const Batch& batch);

// Sampled vCLUB bound as seen by the representation learner:
// mean_i CE(u_i, g(z_i)) - mean_i CE(u_perm(i), g(z_i)). The second
// expectation pairs representations with independent attributes, so the
// objective peaks exactly where z carries no attribute information instead
// of rewarding confidently-wrong adversary states.
Tensor club_privacy_objective(Tape& tape, Mlp& g, Mlp& f, const Batch& batch);

// L2 = mean_i t(x_i, z_i, u_i) - log mean_i exp(t(xbar_i, z_i, u_i)),
// the Donsker-Varadhan (MINE) lower bound with z = f(x). The log-mean-exp
// term is max-shifted. `x_override` evaluates the bound at perturbed inputs.
Tensor mine_objective_l2(Tape& tape, Mlp& t, Mlp& f, const Batch& batch);
Tensor mine_objective_l2_at(Tape& tape, Mlp& t, Mlp& f, const Batch& batch, const Tensor& x_input);

// L3 = mean_i[-sp(-h(x_i, z_i, u_i))] - mean_i[sp(h(xbar_i, z_i, u_i))],
// the Jensen-Shannon utility objective.
Tensor js_objective_l3(Tape& tape, Mlp& h, Mlp& f, const Batch& batch);

// --- exact oracles over finite alphabets ---

// probability table p(a, b); entries >= 0 summing to 1 (1e-12 tolerance)
struct DiscreteJoint {
    Mat p;

    DiscreteJoint(Index na, Index nb) : p(na, nb) {}
    explicit DiscreteJoint(Mat table);
    void validate() const;
    std::vector<double> marginal_a() const;
    std::vector<double> marginal_b() const;
};

DiscreteJoint random_joint(Index na, Index nb, Rng& rng);

// I(a;b) in nats by direct double sum, 0 log 0 = 0
double exact_mi_discrete(const DiscreteJoint& joint);

// MI of a bivariate standard Gaussian pair with correlation rho, in nats
double gaussian_mi(double rho);

// I_vCLUB evaluated with the true posterior p(b|a marginalized the right
// way): E_{p(a,b)}[log p(b|a)] - E_{p(a)p(b)}[log p(b|a)]. Upper-bounds the
// exact MI. `smoothing` is added to the posterior before normalization;
// a zero-probability a-row with zero smoothing is an error.
double club_upper_bound_exact(const DiscreteJoint& joint, double smoothing = 0.0);

// Donsker-Varadhan functional for a fixed critic given as a value table:
// E_p[t] - log E_{p_a x p_b}[e^t]. Never exceeds exact_mi_discrete.
double dv_functional_exact(const DiscreteJoint& joint, const Mat& critic);

// JS functional for a fixed critic: E_p[-sp(-h)] - E_{p_a x p_b}[sp(h)].
// Never exceeds 2*JS(p, p_a x p_b) - 2 log 2.
double js_functional_exact(const DiscreteJoint& joint, const Mat& critic);

// 2*JS(p, p_a x p_b) - 2 log 2, the supremum of the JS functional
double js_functional_supremum(const DiscreteJoint& joint);

} // namespace arprl
