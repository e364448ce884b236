#include "arprl/mi.hpp"

#include <cmath>
#include <stdexcept>

#include "arprl/rng.hpp"

namespace arprl {

Mat Batch::xbar() const {
    Mat out(x.rows, x.cols);
    for (std::size_t i = 0; i < perm.size(); ++i)
        std::copy_n(x.v.data() + perm[i] * x.cols, x.cols,
                    out.v.data() + static_cast<Index>(i) * x.cols);
    return out;
}

Batch make_batch(const Mat& x, std::vector<int> y, std::vector<int> u, int num_attr_values,
                 Rng& rng) {
    if (x.rows < 2) throw std::invalid_argument("make_batch: need at least 2 samples");
    if (static_cast<Index>(y.size()) != x.rows || static_cast<Index>(u.size()) != x.rows)
        throw std::invalid_argument("make_batch: misaligned labels or attributes");
    Batch b;
    b.x = x;
    b.y = std::move(y);
    b.u = std::move(u);
    b.num_attr_values = num_attr_values;
    b.perm = rng.permutation(x.rows);
    return b;
}

Mat attr_embedding(const std::vector<int>& u, int num_attr_values) {
    const auto n = static_cast<Index>(u.size());
    if (num_attr_values == 2) {
        Mat m(n, 1);
        for (Index i = 0; i < n; ++i) m.at(i, 0) = static_cast<double>(u[static_cast<std::size_t>(i)]);
        return m;
    }
    Mat m(n, num_attr_values);
    for (Index i = 0; i < n; ++i) {
        const int v = u[static_cast<std::size_t>(i)];
        if (v < 0 || v >= num_attr_values)
            throw std::invalid_argument("attr_embedding: attribute index " + std::to_string(v) +
                                        " out of range [0, " + std::to_string(num_attr_values) + ")");
        m.at(i, v) = 1.0;
    }
    return m;
}

Tensor privacy_loss_l1(Tape& tape, Mlp& g, Mlp& f, const Batch& batch) {
    for (int v : batch.u)
        if (v < 0 || v >= g.output_dim())
            throw std::invalid_argument("privacy_loss_l1: attribute index " + std::to_string(v) +
                                        " out of range for privacy net width " +
                                        std::to_string(g.output_dim()));
    Tensor x = tape.constant(batch.x);
    Tensor z = f.forward(tape, x);
    Tensor logits = g.forward(tape, z);
    return cross_entropy_mean(logits, batch.u);
}

Tensor club_privacy_objective(Tape& tape, Mlp& g, Mlp& f, const Batch& batch) {
    const int n_values = g.output_dim();
    for (int v : batch.u)
        if (v < 0 || v >= n_values)
            throw std::invalid_argument("club_privacy_objective: attribute index out of range");
    Tensor x = tape.constant(batch.x);
    Tensor z = f.forward(tape, x);
    Tensor logits = g.forward(tape, z);
    // the product-of-marginals expectation is exact within the batch: every
    // row is scored against the batch's empirical attribute distribution
    std::vector<double> marginal(static_cast<std::size_t>(n_values), 0.0);
    for (int v : batch.u) marginal[static_cast<std::size_t>(v)] += 1.0 / static_cast<double>(batch.u.size());
    return sub(cross_entropy_mean(logits, batch.u), cross_entropy_mean_soft(logits, marginal));
}

namespace {

// positives t(x_i, z_i, u_i) and negatives t(xbar_i, z_i, u_i) for a critic;
// z always comes from the (possibly perturbed) inputs
struct CriticScores {
    Tensor pos;
    Tensor neg;
};

CriticScores critic_scores(Tape& tape, Mlp& critic, Mlp& f, const Batch& batch,
                           const Tensor& x_input) {
    if (critic.output_dim() != 1)
        throw std::invalid_argument("critic must be scalar-valued, output width is " +
                                    std::to_string(critic.output_dim()));
    Tensor z = f.forward(tape, x_input);
    Tensor ue = tape.constant(attr_embedding(batch.u, batch.num_attr_values));
    Tensor xbar = gather_rows(x_input, batch.perm);
    Tensor pos_in = concat_cols(concat_cols(x_input, z), ue);
    Tensor neg_in = concat_cols(concat_cols(xbar, z), ue);
    return {critic.forward(tape, pos_in), critic.forward(tape, neg_in)};
}

} // namespace

Tensor mine_objective_l2_at(Tape& tape, Mlp& t, Mlp& f, const Batch& batch,
                            const Tensor& x_input) {
    if (batch.size() < 2) throw std::invalid_argument("mine_objective_l2: batch size must be >= 2");
    CriticScores s = critic_scores(tape, t, f, batch, x_input);
    return sub(mean_all(s.pos), log_mean_exp(s.neg));
}

Tensor mine_objective_l2(Tape& tape, Mlp& t, Mlp& f, const Batch& batch) {
    return mine_objective_l2_at(tape, t, f, batch, tape.constant(batch.x));
}

Tensor js_objective_l3(Tape& tape, Mlp& h, Mlp& f, const Batch& batch) {
    if (batch.size() < 2) throw std::invalid_argument("js_objective_l3: batch size must be >= 2");
    CriticScores s = critic_scores(tape, h, f, batch, tape.constant(batch.x));
    Tensor pos_term = mean_all(neg(softplus(neg(s.pos))));
    Tensor neg_term = mean_all(softplus(s.neg));
    return sub(pos_term, neg_term);
}

// --- exact oracles ---

DiscreteJoint::DiscreteJoint(Mat table) : p(std::move(table)) { validate(); }

void DiscreteJoint::validate() const {
    double total = 0.0;
    for (double v : p.v) {
        if (v < 0.0) throw std::invalid_argument("DiscreteJoint: negative probability");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("DiscreteJoint: probabilities sum to " + std::to_string(total));
}

std::vector<double> DiscreteJoint::marginal_a() const {
    std::vector<double> m(static_cast<std::size_t>(p.rows), 0.0);
    for (Index a = 0; a < p.rows; ++a)
        for (Index b = 0; b < p.cols; ++b) m[static_cast<std::size_t>(a)] += p.at(a, b);
    return m;
}

std::vector<double> DiscreteJoint::marginal_b() const {
    std::vector<double> m(static_cast<std::size_t>(p.cols), 0.0);
    for (Index a = 0; a < p.rows; ++a)
        for (Index b = 0; b < p.cols; ++b) m[static_cast<std::size_t>(b)] += p.at(a, b);
    return m;
}

DiscreteJoint random_joint(Index na, Index nb, Rng& rng) {
    Mat t(na, nb);
    double total = 0.0;
    for (auto& v : t.v) {
        v = -std::log(1.0 - rng.uniform()); // Exp(1) draws normalize to a flat Dirichlet
        total += v;
    }
    for (auto& v : t.v) v /= total;
    // renormalize exactly so validate()'s 1e-12 budget holds
    double s2 = 0.0;
    for (double v : t.v) s2 += v;
    for (auto& v : t.v) v /= s2;
    return DiscreteJoint(std::move(t));
}

double exact_mi_discrete(const DiscreteJoint& joint) {
    joint.validate();
    const auto pa = joint.marginal_a();
    const auto pb = joint.marginal_b();
    double mi = 0.0;
    for (Index a = 0; a < joint.p.rows; ++a)
        for (Index b = 0; b < joint.p.cols; ++b) {
            const double pab = joint.p.at(a, b);
            if (pab <= 0.0) continue;
            mi += pab * std::log(pab / (pa[static_cast<std::size_t>(a)] * pb[static_cast<std::size_t>(b)]));
        }
    return mi;
}

double gaussian_mi(double rho) {
    if (!(std::abs(rho) < 1.0))
        throw std::invalid_argument("gaussian_mi: |rho| must be < 1, got " + std::to_string(rho));
    return -0.5 * std::log(1.0 - rho * rho);
}

double club_upper_bound_exact(const DiscreteJoint& joint, double smoothing) {
    joint.validate();
    const auto pa = joint.marginal_a();
    const auto pb = joint.marginal_b();
    const Index na = joint.p.rows, nb = joint.p.cols;

    // posterior q(b|a) = (p(a,b) + smoothing) / sum_b (p(a,b) + smoothing)
    Mat q(na, nb);
    for (Index a = 0; a < na; ++a) {
        double row = 0.0;
        for (Index b = 0; b < nb; ++b) row += joint.p.at(a, b) + smoothing;
        if (row <= 0.0)
            throw std::invalid_argument("club_upper_bound_exact: zero-probability row " +
                                        std::to_string(a) + " leaves the posterior undefined");
        for (Index b = 0; b < nb; ++b) q.at(a, b) = (joint.p.at(a, b) + smoothing) / row;
    }

    double joint_term = 0.0, marginal_term = 0.0;
    for (Index a = 0; a < na; ++a)
        for (Index b = 0; b < nb; ++b) {
            const double lq = std::log(q.at(a, b));
            if (joint.p.at(a, b) > 0.0) joint_term += joint.p.at(a, b) * lq;
            const double pprod = pa[static_cast<std::size_t>(a)] * pb[static_cast<std::size_t>(b)];
            if (pprod > 0.0) {
                if (q.at(a, b) <= 0.0)
                    throw std::invalid_argument(
                        "club_upper_bound_exact: posterior zero on a product-support cell; "
                        "use smoothing");
                marginal_term += pprod * lq;
            }
        }
    return joint_term - marginal_term;
}

double dv_functional_exact(const DiscreteJoint& joint, const Mat& critic) {
    if (critic.rows != joint.p.rows || critic.cols != joint.p.cols)
        throw std::invalid_argument("dv_functional_exact: critic table shape " + critic.shape_str() +
                                    " does not match joint " + joint.p.shape_str());
    const auto pa = joint.marginal_a();
    const auto pb = joint.marginal_b();
    double e_joint = 0.0;
    double max_t = critic.v.empty() ? 0.0 : critic.v[0];
    for (double t : critic.v) max_t = std::max(max_t, t);
    double e_prod = 0.0;
    for (Index a = 0; a < joint.p.rows; ++a)
        for (Index b = 0; b < joint.p.cols; ++b) {
            e_joint += joint.p.at(a, b) * critic.at(a, b);
            e_prod += pa[static_cast<std::size_t>(a)] * pb[static_cast<std::size_t>(b)] *
                      std::exp(critic.at(a, b) - max_t);
        }
    return e_joint - (max_t + std::log(e_prod));
}

double js_functional_exact(const DiscreteJoint& joint, const Mat& critic) {
    if (critic.rows != joint.p.rows || critic.cols != joint.p.cols)
        throw std::invalid_argument("js_functional_exact: critic table shape " + critic.shape_str() +
                                    " does not match joint " + joint.p.shape_str());
    const auto pa = joint.marginal_a();
    const auto pb = joint.marginal_b();
    double pos = 0.0, neg = 0.0;
    for (Index a = 0; a < joint.p.rows; ++a)
        for (Index b = 0; b < joint.p.cols; ++b) {
            pos += joint.p.at(a, b) * (-stable_softplus(-critic.at(a, b)));
            neg += pa[static_cast<std::size_t>(a)] * pb[static_cast<std::size_t>(b)] *
                   stable_softplus(critic.at(a, b));
        }
    return pos - neg;
}

double js_functional_supremum(const DiscreteJoint& joint) {
    const auto pa = joint.marginal_a();
    const auto pb = joint.marginal_b();
    // JS(P, Q) with Q the product of marginals, via the midpoint M
    double js = 0.0;
    for (Index a = 0; a < joint.p.rows; ++a)
        for (Index b = 0; b < joint.p.cols; ++b) {
            const double p = joint.p.at(a, b);
            const double q = pa[static_cast<std::size_t>(a)] * pb[static_cast<std::size_t>(b)];
            const double m = 0.5 * (p + q);
            if (p > 0.0) js += 0.5 * p * std::log(p / m);
            if (q > 0.0) js += 0.5 * q * std::log(q / m);
        }
    return 2.0 * js - 2.0 * std::log(2.0);
}

} // namespace arprl
