#include "arprl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "arprl/rng.hpp"

namespace arprl {

namespace {

constexpr Index kEvalChunk = 512;

Mat take_rows(const Mat& x, Index begin, Index count) {
    Mat out(count, x.cols);
    std::copy_n(x.v.data() + begin * x.cols, count * x.cols, out.v.data());
    return out;
}

} // namespace

Mat representations(const ModelBundle& bundle, const Mat& x) {
    Mat z(x.rows, bundle.meta.rep_dim);
    for (Index begin = 0; begin < x.rows; begin += kEvalChunk) {
        const Index count = std::min(kEvalChunk, x.rows - begin);
        Tape tape;
        Tensor zt = bundle.f.forward_frozen(tape, tape.constant(take_rows(x, begin, count)));
        std::copy_n(zt.data().data(), count * z.cols, z.v.data() + begin * z.cols);
    }
    return z;
}

namespace {

std::vector<int> argmax_rows(const Mat& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.rows));
    for (Index i = 0; i < logits.rows; ++i) {
        int best = 0;
        for (Index j = 1; j < logits.cols; ++j)
            if (logits.at(i, j) > logits.at(i, best)) best = static_cast<int>(j);
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

Mat forward_frozen_chunked(const Mlp& net, const Mat& x) {
    Mat out(x.rows, net.output_dim());
    for (Index begin = 0; begin < x.rows; begin += kEvalChunk) {
        const Index count = std::min(kEvalChunk, x.rows - begin);
        Tape tape;
        Tensor y = net.forward_frozen(tape, tape.constant(take_rows(x, begin, count)));
        std::copy_n(y.data().data(), count * out.cols, out.v.data() + begin * out.cols);
    }
    return out;
}

} // namespace

std::vector<int> probe_predictions(const Mlp& probe, const ModelBundle& bundle, const Mat& x) {
    return argmax_rows(forward_frozen_chunked(probe, representations(bundle, x)));
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("accuracy: misaligned or empty prediction vectors");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

Mlp fit_probe_classifier(const ModelBundle& bundle, const Dataset& data, ProbeTarget target,
                         std::uint64_t seed, const ProbeTrainConfig& cfg) {
    const std::vector<int> targets_all =
        (target == ProbeTarget::label) ? data.labels_at(data.train_idx) : data.attrs_at(data.train_idx);
    const int n_out =
        (target == ProbeTarget::label) ? data.num_classes : data.num_attr_values;
    {
        const int first = targets_all.front();
        bool degenerate = true;
        for (int v : targets_all)
            if (v != first) { degenerate = false; break; }
        if (degenerate)
            throw std::invalid_argument("fit_probe_classifier: target takes a single value on the "
                                        "train split");
    }

    // representations are fixed while the learner is frozen, so cache them
    const Mat z_train = representations(bundle, data.rows(data.train_idx));
    const int hidden = (data.kind == DatasetKind::toy) ? 5 : 16;
    Mlp probe = make_mlp({bundle.meta.rep_dim, hidden, n_out}, Activation::relu,
                         OutputKind::softmax_logits);
    init_params(probe, derive_seed(seed, {static_cast<std::uint64_t>(target == ProbeTarget::label ? 11 : 12)}));

    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(target == ProbeTarget::label ? 13 : 14)}));
    const Index n = z_train.rows;
    std::vector<double> epoch_losses;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const std::vector<Index> perm = rng.permutation(n);
        double loss_sum = 0.0;
        Index batches = 0;
        for (Index begin = 0; begin < n; begin += cfg.batch_size) {
            const Index count = std::min<Index>(cfg.batch_size, n - begin);
            if (count < 2) continue;
            Mat zb(count, z_train.cols);
            std::vector<int> tb(static_cast<std::size_t>(count));
            for (Index k = 0; k < count; ++k) {
                const Index row = perm[static_cast<std::size_t>(begin + k)];
                std::copy_n(z_train.v.data() + row * z_train.cols, z_train.cols,
                            zb.v.data() + k * z_train.cols);
                tb[static_cast<std::size_t>(k)] = targets_all[static_cast<std::size_t>(row)];
            }
            Tape tape;
            Tensor loss = cross_entropy_mean(probe.forward(tape, tape.constant(zb)), tb);
            loss_sum += loss.scalar();
            ++batches;
            tape.backward(loss);
            sgd_step(probe, cfg.lr, StepDirection::descend);
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(batches));
        const std::size_t k = epoch_losses.size();
        if (k > static_cast<std::size_t>(cfg.window) &&
            epoch_losses[k - 1 - static_cast<std::size_t>(cfg.window)] - epoch_losses[k - 1] <
                cfg.improve_tol)
            break;
    }
    return probe;
}

Mat adversarial_inputs(const Mlp& task_probe, const ModelBundle& bundle, const Mat& x,
                       const std::vector<int>& y, const AttackConfig& cfg) {
    AttackConfig task_cfg = cfg;
    task_cfg.objective = AttackObjective::task_loss;
    Mat out(x.rows, x.cols);
    for (Index begin = 0; begin < x.rows; begin += kEvalChunk) {
        const Index count = std::min(kEvalChunk, x.rows - begin);
        const Mat chunk = take_rows(x, begin, count);
        std::vector<int> yc(y.begin() + begin, y.begin() + begin + count);
        const Mat adv = pgd_attack(
            [&](Tape& tape, const Tensor& leaf) {
                Tensor z = bundle.f.forward_frozen(tape, leaf);
                return cross_entropy_mean(task_probe.forward_frozen(tape, z), yc);
            },
            chunk, task_cfg);
        std::copy_n(adv.v.data(), count * x.cols, out.v.data() + begin * x.cols);
    }
    return out;
}

double advantage_from_predictions(const std::vector<int>& pred, const std::vector<int>& attr) {
    if (pred.size() != attr.size() || pred.empty())
        throw std::invalid_argument("advantage: misaligned or empty inputs");
    double n[2] = {0.0, 0.0};
    double hit[2][2] = {{0.0, 0.0}, {0.0, 0.0}}; // hit[a][value]: P(A(z)=value | u=a) counts
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int a = attr[i];
        if (a < 0 || a > 1)
            throw std::invalid_argument("advantage: attribute must be binary, saw value " +
                                        std::to_string(a));
        if (pred[i] < 0 || pred[i] > 1)
            throw std::invalid_argument("advantage: adversary output must be binary");
        n[a] += 1.0;
        hit[a][pred[i]] += 1.0;
    }
    if (n[0] == 0.0 || n[1] == 0.0)
        throw std::runtime_error("advantage: empty conditional slice (one attribute value absent)");
    double best = 0.0;
    for (int a = 0; a < 2; ++a) {
        const double p_same = hit[a][a] / n[a];
        const double p_other = hit[1 - a][a] / n[1 - a];
        best = std::max(best, std::abs(p_same - p_other));
    }
    return best;
}

double compute_advantage(const Mlp& adversary, const ModelBundle& bundle, const Dataset& data,
                         const Mat* x_adv) {
    if (data.num_attr_values != 2)
        throw std::invalid_argument("compute_advantage: attribute must be binary, cardinality is " +
                                    std::to_string(data.num_attr_values));
    const Mat x_test = x_adv ? *x_adv : data.rows(data.test_idx);
    const std::vector<int> pred = probe_predictions(adversary, bundle, x_test);
    return advantage_from_predictions(pred, data.attrs_at(data.test_idx));
}

MetricsReport evaluate_metrics(const ModelBundle& bundle, const Dataset& data,
                               const AttackConfig& attack, std::uint64_t seed) {
    attack.validate();
    MetricsReport m;
    m.alpha = bundle.config.alpha;
    m.beta = bundle.config.beta;
    m.seed = seed;
    m.attack = attack;

    const Mlp task_probe = fit_probe_classifier(bundle, data, ProbeTarget::label, seed);
    const Mlp attr_probe = fit_probe_classifier(bundle, data, ProbeTarget::attribute, seed);

    const Mat x_test = data.rows(data.test_idx);
    const std::vector<int> y_test = data.labels_at(data.test_idx);
    const std::vector<int> u_test = data.attrs_at(data.test_idx);

    m.test_acc = accuracy(probe_predictions(task_probe, bundle, x_test), y_test);
    const Mat x_adv = adversarial_inputs(task_probe, bundle, x_test, y_test, attack);
    m.robust_acc = accuracy(probe_predictions(task_probe, bundle, x_adv), y_test);
    m.infer_acc = accuracy(probe_predictions(attr_probe, bundle, x_test), u_test);
    m.majority_rate = data.attr_majority_rate(data.test_idx);
    m.infer_gap = m.infer_acc - m.majority_rate;
    if (data.num_attr_values == 2) {
        m.advantage = compute_advantage(attr_probe, bundle, data);
        m.advantage_perturbed = compute_advantage(attr_probe, bundle, data, &x_adv);
    } else {
        m.advantage = 0.0; // defined only for binary attributes
        m.advantage_perturbed = 0.0;
    }
    return m;
}

std::string metrics_csv_header() {
    return "alpha,beta,seed,test_acc,robust_acc,infer_acc,gap,advantage";
}

std::string metrics_csv_row(const MetricsReport& m) {
    std::ostringstream os;
    os << format_double(m.alpha) << "," << format_double(m.beta) << "," << m.seed << ","
       << format_double(m.test_acc) << "," << format_double(m.robust_acc) << ","
       << format_double(m.infer_acc) << "," << format_double(m.infer_gap) << ","
       << format_double(m.advantage);
    return os.str();
}

void write_metrics_csv(const std::vector<MetricsReport>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << metrics_csv_header() << "\n";
    for (const auto& r : rows) os << metrics_csv_row(r) << "\n";
}

// --- trained critic estimators ---

namespace {

Mat hstack(const Mat& a, const Mat& b) {
    Mat out(a.rows, a.cols + b.cols);
    for (Index i = 0; i < a.rows; ++i) {
        std::copy_n(a.v.data() + i * a.cols, a.cols, out.v.data() + i * out.cols);
        std::copy_n(b.v.data() + i * b.cols, b.cols, out.v.data() + i * out.cols + a.cols);
    }
    return out;
}

struct CriticData {
    Mat features; // (N, a+b+attr) positives; negatives permute the a block
    Index a_cols = 0;
};

CriticData assemble_critic_data(const Mat& a, const Mat& b, const std::vector<int>* attr,
                                int num_attr_values) {
    if (a.rows != b.rows) throw std::invalid_argument("critic estimator: misaligned sample counts");
    Mat feat = hstack(a, b);
    if (attr) {
        if (static_cast<Index>(attr->size()) != a.rows)
            throw std::invalid_argument("critic estimator: misaligned attribute vector");
        feat = hstack(feat, attr_embedding(*attr, num_attr_values));
    }
    return {std::move(feat), a.cols};
}

// positives are rows as-is; negatives have the first a_cols columns taken
// from a permuted row (the independent-sample construction)
Mat negatives(const CriticData& d, const std::vector<Index>& rows, const std::vector<Index>& perm) {
    Mat out(static_cast<Index>(rows.size()), d.features.cols);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double* pos_row = d.features.v.data() + rows[k] * d.features.cols;
        const double* donor = d.features.v.data() + rows[perm[k]] * d.features.cols;
        double* dst = out.v.data() + static_cast<Index>(k) * d.features.cols;
        std::copy_n(donor, d.a_cols, dst);
        std::copy_n(pos_row + d.a_cols, d.features.cols - d.a_cols, dst + d.a_cols);
    }
    return out;
}

Mat gather(const Mat& m, const std::vector<Index>& rows) {
    Mat out(static_cast<Index>(rows.size()), m.cols);
    for (std::size_t k = 0; k < rows.size(); ++k)
        std::copy_n(m.v.data() + rows[k] * m.cols, m.cols,
                    out.v.data() + static_cast<Index>(k) * m.cols);
    return out;
}

enum class CriticKind { dv, js };

double critic_objective_value(Mlp& critic, const Mat& pos, const Mat& neg_rows, CriticKind kind,
                              bool train_step, double lr, double clip) {
    Tape tape;
    Tensor s_pos = critic.forward(tape, tape.constant(pos));
    Tensor s_neg = critic.forward(tape, tape.constant(neg_rows));
    Tensor obj = (kind == CriticKind::dv)
                     ? sub(mean_all(s_pos), log_mean_exp(s_neg))
                     : sub(mean_all(neg(softplus(neg(s_pos)))), mean_all(softplus(s_neg)));
    const double v = obj.scalar();
    if (train_step) {
        tape.backward(obj);
        clip_grad_norm(critic, clip);
        sgd_step(critic, lr, StepDirection::ascend);
    }
    return v;
}

// Permutation of 0..n-1 for the independent-sample construction. With an
// attribute present the permutation stays inside each attribute stratum so
// the functional targets the conditional dependence I(a; b | attr) rather
// than picking up I(a; attr) itself.
std::vector<Index> negative_permutation(Index n, const std::vector<int>* attr,
                                        const std::vector<Index>& rows, Rng& rng) {
    if (!attr) return rng.permutation(n);
    std::vector<std::vector<Index>> strata;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const int v = (*attr)[static_cast<std::size_t>(rows[k])];
        if (static_cast<std::size_t>(v) >= strata.size()) strata.resize(static_cast<std::size_t>(v) + 1);
        strata[static_cast<std::size_t>(v)].push_back(static_cast<Index>(k));
    }
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (auto& members : strata) {
        const std::vector<Index> shuffle = rng.permutation(static_cast<Index>(members.size()));
        for (std::size_t k = 0; k < members.size(); ++k)
            perm[static_cast<std::size_t>(members[k])] = members[static_cast<std::size_t>(shuffle[k])];
    }
    return perm;
}

double trained_critic_estimate(const Mat& a, const Mat& b, const std::vector<int>* attr,
                               int num_attr_values, std::uint64_t seed,
                               const CriticEstimatorConfig& cfg, CriticKind kind) {
    const CriticData data = assemble_critic_data(a, b, attr, num_attr_values);
    const Index n = data.features.rows;
    if (n < 2) throw std::invalid_argument("critic estimator: need at least 2 samples");

    Mlp critic = make_mlp({static_cast<int>(data.features.cols), cfg.hidden, 1}, Activation::relu,
                          OutputKind::none);
    init_params(critic, derive_seed(seed, {21}));
    Rng rng(derive_seed(seed, {22}));

    const Index bsz = std::min<Index>(cfg.batch_size, n);
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<Index> rows(static_cast<std::size_t>(bsz));
        for (auto& r : rows) r = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
        const std::vector<Index> perm = negative_permutation(bsz, attr, rows, rng);
        const Mat pos = gather(data.features, rows);
        const Mat neg_m = negatives(data, rows, perm);
        const double v =
            critic_objective_value(critic, pos, neg_m, kind, true, cfg.lr, cfg.clip_norm);
        if (!std::isfinite(v))
            throw std::runtime_error("critic estimator: objective diverged at step " +
                                     std::to_string(step));
    }

    // final estimate on the full sample, averaged over fresh permutations
    std::vector<Index> all(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    double total = 0.0;
    for (int k = 0; k < cfg.eval_permutations; ++k) {
        const std::vector<Index> perm = negative_permutation(n, attr, all, rng);
        const Mat neg_m = negatives(data, all, perm);
        total += critic_objective_value(critic, data.features, neg_m, kind, false, 0.0, 0.0);
    }
    return total / static_cast<double>(cfg.eval_permutations);
}

} // namespace

double mine_estimate(const Mat& a, const Mat& b, const std::vector<int>* attr, int num_attr_values,
                     std::uint64_t seed, const CriticEstimatorConfig& cfg) {
    return trained_critic_estimate(a, b, attr, num_attr_values, seed, cfg, CriticKind::dv);
}

double js_estimate(const Mat& a, const Mat& b, const std::vector<int>* attr, int num_attr_values,
                   std::uint64_t seed, const CriticEstimatorConfig& cfg) {
    return trained_critic_estimate(a, b, attr, num_attr_values, seed, cfg, CriticKind::js);
}

RvEstimate estimate_rv(const ModelBundle& bundle, const Dataset& data, const AttackConfig& attack,
                       std::uint64_t seed, const CriticEstimatorConfig& cfg) {
    attack.validate();
    const Mat x_test = data.rows(data.test_idx);
    const std::vector<int> u_test = data.attrs_at(data.test_idx);

    // worst-case perturbations from the alternating search, on a copy of the
    // trained robustness critic so the bundle stays frozen
    Mlp search_critic = bundle.t;
    Mlp f_copy = bundle.f;
    WorstCaseConfig wc;
    wc.attack = attack;
    wc.attack.objective = AttackObjective::mi_loss;
    wc.critic_steps = 10;
    wc.critic_lr = 1e-3;
    wc.rounds = 1;
    wc.update_critic = true;

    Mat x_adv(x_test.rows, x_test.cols);
    Rng rng(derive_seed(seed, {31}));
    for (Index begin = 0; begin < x_test.rows; begin += kEvalChunk) {
        const Index count = std::min(kEvalChunk, x_test.rows - begin);
        if (count < 2) {
            std::copy_n(x_test.v.data() + begin * x_test.cols, count * x_test.cols,
                        x_adv.v.data() + begin * x_test.cols);
            continue;
        }
        Batch batch;
        batch.x = take_rows(x_test, begin, count);
        batch.u.assign(u_test.begin() + begin, u_test.begin() + begin + count);
        batch.y.assign(static_cast<std::size_t>(count), 0);
        batch.num_attr_values = data.num_attr_values;
        batch.perm = rng.permutation(count);
        const WorstCaseResult res = worst_case_mi_search(search_critic, f_copy, batch, wc);
        std::copy_n(res.x_adv.v.data(), count * x_test.cols, x_adv.v.data() + begin * x_test.cols);
    }

    RvEstimate out;
    const Mat z_clean = representations(bundle, x_test);
    const Mat z_adv = representations(bundle, x_adv);
    out.mi_clean = mine_estimate(x_test, z_clean, &u_test, data.num_attr_values,
                                 derive_seed(seed, {32}), cfg);
    out.mi_adv = mine_estimate(x_adv, z_adv, &u_test, data.num_attr_values,
                               derive_seed(seed, {33}), cfg);
    out.rv = out.mi_clean - out.mi_adv;
    return out;
}

double estimate_lipschitz(const Mlp& net, int iterations, double tol) {
    double bound = 1.0;
    for (const Param& w : net.weights) {
        const Index in = w.value.rows, out = w.value.cols;
        std::vector<double> v(static_cast<std::size_t>(out),
                              1.0 / std::sqrt(static_cast<double>(out)));
        double sigma = 0.0;
        for (int it = 0; it < iterations; ++it) {
            // u = W v, then v = W^T u, normalized; sigma converges to ||W||_2
            std::vector<double> u(static_cast<std::size_t>(in), 0.0);
            for (Index i = 0; i < in; ++i) {
                double s = 0.0;
                for (Index j = 0; j < out; ++j) s += w.value.at(i, j) * v[static_cast<std::size_t>(j)];
                u[static_cast<std::size_t>(i)] = s;
            }
            double un = 0.0;
            for (double x : u) un += x * x;
            un = std::sqrt(un);
            if (un == 0.0) { sigma = 0.0; break; }
            for (auto& x : u) x /= un;
            std::vector<double> v2(static_cast<std::size_t>(out), 0.0);
            for (Index i = 0; i < in; ++i)
                for (Index j = 0; j < out; ++j)
                    v2[static_cast<std::size_t>(j)] += w.value.at(i, j) * u[static_cast<std::size_t>(i)];
            double vn = 0.0;
            for (double x : v2) vn += x * x;
            vn = std::sqrt(vn);
            if (vn == 0.0) { sigma = 0.0; break; }
            for (auto& x : v2) x /= vn;
            v = v2;
            if (std::abs(vn - sigma) < tol) { sigma = vn; break; }
            sigma = vn;
        }
        bound *= sigma;
    }
    return bound;
}

double theorem5_cap(double h_bits) {
    if (h_bits <= 0.0) return 1.0;
    const double h = std::min(h_bits, 1.0); // binary attribute entropy is at most 1 bit
    return 1.0 - h / (2.0 * std::log2(6.0 / h));
}

namespace {

TheoremCheck lower_bound_check(std::string name, double lhs, double rhs, bool exact) {
    TheoremCheck c;
    c.name = std::move(name);
    c.lhs = lhs;
    c.rhs = rhs;
    c.slack = lhs - rhs;
    c.holds = lhs >= rhs - 1e-9;
    c.exact = exact;
    return c;
}

TheoremCheck upper_bound_check(std::string name, double lhs, double rhs, bool exact) {
    TheoremCheck c;
    c.name = std::move(name);
    c.lhs = lhs;
    c.rhs = rhs;
    c.slack = rhs - lhs;
    c.holds = lhs <= rhs + 1e-9;
    c.exact = exact;
    return c;
}

} // namespace

BoundReport check_theorem_bounds(const ModelBundle& bundle, const Dataset& data,
                                 const AttackConfig& attack, std::uint64_t seed,
                                 const CriticEstimatorConfig& cfg) {
    if (data.num_attr_values != 2)
        throw std::invalid_argument("check_theorem_bounds: binary attribute required");
    if (data.num_classes != 2)
        throw std::invalid_argument("check_theorem_bounds: binary label required");

    BoundReport r;
    const Mlp task_probe = fit_probe_classifier(bundle, data, ProbeTarget::label, seed);
    const Mlp attr_probe = fit_probe_classifier(bundle, data, ProbeTarget::attribute, seed);

    const Mat x_test = data.rows(data.test_idx);
    const std::vector<int> y_test = data.labels_at(data.test_idx);
    const std::vector<int> u_test = data.attrs_at(data.test_idx);

    r.risk = 1.0 - accuracy(probe_predictions(task_probe, bundle, x_test), y_test);
    const Mat x_adv = adversarial_inputs(task_probe, bundle, x_test, y_test, attack);
    r.adv_risk = 1.0 - accuracy(probe_predictions(task_probe, bundle, x_adv), y_test);
    r.infer_acc = accuracy(probe_predictions(attr_probe, bundle, x_test), u_test);

    r.delta_y_u = data.label_rate_gap(data.test_idx);
    r.adv_clean = compute_advantage(attr_probe, bundle, data);
    r.adv_perturbed = compute_advantage(attr_probe, bundle, data, &x_adv);
    r.lipschitz = estimate_lipschitz(task_probe);

    // R covers clean and perturbed representations
    const Mat z_clean = representations(bundle, x_test);
    const Mat z_adv = representations(bundle, x_adv);
    double rmax = 0.0;
    for (const Mat* z : {&z_clean, &z_adv})
        for (Index i = 0; i < z->rows; ++i) {
            double s = 0.0;
            for (Index j = 0; j < z->cols; ++j) s += z->at(i, j) * z->at(i, j);
            rmax = std::max(rmax, std::sqrt(s));
        }
    r.rep_norm_bound = rmax;

    // H(u|z) upper-bounded by the adversary's test cross-entropy, in bits
    {
        Tape tape;
        Tensor logits = attr_probe.forward_frozen(tape, tape.constant(z_clean));
        r.h_u_z_bits = cross_entropy_mean(logits, u_test).scalar() / std::log(2.0);
    }

    const RvEstimate rv = estimate_rv(bundle, data, attack, seed, cfg);
    r.mi_clean = rv.mi_clean;
    r.mi_adv = rv.mi_adv;
    r.rv = rv.rv;

    const double bound_term = 2.0 * r.rep_norm_bound * r.lipschitz;
    r.checks.push_back(lower_bound_check(
        "theorem2_advrisk_vs_rv", r.adv_risk, (r.rv - r.mi_clean) / std::log(2.0), false));
    r.checks.push_back(lower_bound_check(
        "theorem3_risk_vs_advantage", r.risk, r.delta_y_u - bound_term * r.adv_clean, false));
    r.checks.push_back(lower_bound_check(
        "theorem4_advrisk_vs_advantage", r.adv_risk, r.delta_y_u - bound_term * r.adv_perturbed,
        false));
    r.checks.push_back(upper_bound_check(
        "theorem5_inference_cap", r.infer_acc, theorem5_cap(r.h_u_z_bits), false));
    return r;
}

std::string bound_report_text(const BoundReport& r) {
    std::ostringstream os;
    os << "I(x;z|u) estimate      " << format_double(r.mi_clean) << " nats\n"
       << "I(x';z'|u) estimate    " << format_double(r.mi_adv) << " nats\n"
       << "RV estimate            " << format_double(r.rv) << " nats\n"
       << "delta_{y|u}            " << format_double(r.delta_y_u) << "\n"
       << "R (max ||z||)          " << format_double(r.rep_norm_bound) << "\n"
       << "C_L (spectral bound)   " << format_double(r.lipschitz) << "\n"
       << "H(u|z) estimate        " << format_double(r.h_u_z_bits) << " bits\n"
       << "Risk                   " << format_double(r.risk) << "\n"
       << "AdvRisk                " << format_double(r.adv_risk) << "\n"
       << "Adv (clean)            " << format_double(r.adv_clean) << "\n"
       << "Adv (perturbed)        " << format_double(r.adv_perturbed) << "\n"
       << "inference accuracy     " << format_double(r.infer_acc) << "\n";
    for (const auto& c : r.checks) {
        os << c.name << ": lhs=" << format_double(c.lhs) << " rhs=" << format_double(c.rhs)
           << " slack=" << format_double(c.slack) << " " << (c.holds ? "holds" : "VIOLATED")
           << " [" << (c.exact ? "exact" : "estimated") << "]\n";
    }
    return os.str();
}

void write_bound_report(const BoundReport& r, const std::string& csv_path,
                        const std::string& text_path) {
    {
        std::ofstream os(csv_path);
        if (!os) throw std::runtime_error("cannot open for writing: " + csv_path);
        os << "mi_clean,mi_adv,rv,delta_y_u,rep_norm,lipschitz,h_u_z_bits,risk,adv_risk,"
              "adv_clean,adv_perturbed,infer_acc";
        for (const auto& c : r.checks) os << "," << c.name << "_lhs," << c.name << "_rhs," << c.name << "_holds";
        os << "\n";
        os << format_double(r.mi_clean) << "," << format_double(r.mi_adv) << ","
           << format_double(r.rv) << "," << format_double(r.delta_y_u) << ","
           << format_double(r.rep_norm_bound) << "," << format_double(r.lipschitz) << ","
           << format_double(r.h_u_z_bits) << "," << format_double(r.risk) << ","
           << format_double(r.adv_risk) << "," << format_double(r.adv_clean) << ","
           << format_double(r.adv_perturbed) << "," << format_double(r.infer_acc);
        for (const auto& c : r.checks)
            os << "," << format_double(c.lhs) << "," << format_double(c.rhs) << ","
               << (c.holds ? 1 : 0);
        os << "\n";
    }
    std::ofstream ts(text_path);
    if (!ts) throw std::runtime_error("cannot open for writing: " + text_path);
    ts << bound_report_text(r);
}

// --- exact brute-force verification ---

void DiscreteJoint3::validate() const {
    double total = 0.0;
    for (double v : p) {
        if (v < 0.0) throw std::invalid_argument("DiscreteJoint3: negative probability");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("DiscreteJoint3: probabilities sum to " + std::to_string(total));
}

DiscreteJoint3 random_joint3(Index nz, Rng& rng) {
    DiscreteJoint3 j(nz);
    double total = 0.0;
    for (auto& v : j.p) {
        v = -std::log(1.0 - rng.uniform());
        total += v;
    }
    for (auto& v : j.p) v /= total;
    double s2 = 0.0;
    for (double v : j.p) s2 += v;
    for (auto& v : j.p) v /= s2;
    return j;
}

BoundReport check_bounds_discrete_oracle(const DiscreteJoint3& joint,
                                         const std::vector<double>& z_embedding) {
    joint.validate();
    const Index nz = joint.nz;
    if (nz < 1 || nz > 8)
        throw std::invalid_argument("check_bounds_discrete_oracle: |Z| must be in [1, 8], got " +
                                    std::to_string(nz));
    if (static_cast<Index>(z_embedding.size()) != nz)
        throw std::invalid_argument("check_bounds_discrete_oracle: embedding size mismatch");

    std::vector<double> pz(static_cast<std::size_t>(nz), 0.0);
    double pu[2] = {0.0, 0.0};
    std::vector<double> pzu(static_cast<std::size_t>(nz * 2), 0.0); // [z][u]
    double pyu[2][2] = {{0.0, 0.0}, {0.0, 0.0}};                    // [y][u]
    for (Index z = 0; z < nz; ++z)
        for (int y = 0; y < 2; ++y)
            for (int u = 0; u < 2; ++u) {
                const double v = joint.at(z, y, u);
                pz[static_cast<std::size_t>(z)] += v;
                pu[u] += v;
                pzu[static_cast<std::size_t>(z * 2 + u)] += v;
                pyu[y][u] += v;
            }
    if (pu[0] <= 0.0 || pu[1] <= 0.0)
        throw std::runtime_error("check_bounds_discrete_oracle: empty attribute slice");

    BoundReport r;
    r.delta_y_u = std::abs(pyu[1][0] / pu[0] - pyu[1][1] / pu[1]);

    // worst-case advantage = TV distance between p(z|u=0) and p(z|u=1)
    double tv = 0.0;
    for (Index z = 0; z < nz; ++z)
        tv += std::abs(pzu[static_cast<std::size_t>(z * 2 + 0)] / pu[0] -
                       pzu[static_cast<std::size_t>(z * 2 + 1)] / pu[1]);
    r.adv_clean = 0.5 * tv;

    // Bayes-optimal adversary accuracy and exact H(u|z) in bits
    double bayes_acc = 0.0;
    double h_bits = 0.0;
    for (Index z = 0; z < nz; ++z) {
        const double p0 = pzu[static_cast<std::size_t>(z * 2 + 0)];
        const double p1 = pzu[static_cast<std::size_t>(z * 2 + 1)];
        bayes_acc += std::max(p0, p1);
        const double pzv = p0 + p1;
        if (pzv <= 0.0) continue;
        for (double pc : {p0 / pzv, p1 / pzv})
            if (pc > 0.0) h_bits -= pzv * pc * std::log2(pc);
    }
    r.infer_acc = bayes_acc;
    r.h_u_z_bits = h_bits;

    double rmax = 0.0;
    for (double e : z_embedding) rmax = std::max(rmax, std::abs(e));
    r.rep_norm_bound = rmax;

    // enumerate every classifier C: Z -> {0,1}
    double min_cond_margin = std::numeric_limits<double>::infinity();
    TheoremCheck cond_worst, total_worst;
    bool total_holds = true;
    double bayes_risk = 1.0;
    for (std::uint32_t mask = 0; mask < (1u << nz); ++mask) {
        auto cls = [mask](Index z) { return static_cast<int>((mask >> z) & 1u); };
        double risk = 0.0;
        double risk_u[2] = {0.0, 0.0};
        for (Index z = 0; z < nz; ++z)
            for (int y = 0; y < 2; ++y)
                for (int u = 0; u < 2; ++u)
                    if (cls(z) != y) {
                        risk += joint.at(z, y, u);
                        risk_u[u] += joint.at(z, y, u);
                    }
        risk_u[0] /= pu[0];
        risk_u[1] /= pu[1];
        bayes_risk = std::min(bayes_risk, risk);

        double lip = 0.0;
        for (Index i = 0; i < nz; ++i)
            for (Index j = i + 1; j < nz; ++j) {
                if (cls(i) == cls(j)) continue;
                const double dist = std::abs(z_embedding[static_cast<std::size_t>(i)] -
                                             z_embedding[static_cast<std::size_t>(j)]);
                lip = std::max(lip, dist > 0.0 ? 1.0 / dist
                                               : std::numeric_limits<double>::infinity());
            }
        const double rhs = r.delta_y_u - 2.0 * rmax * lip * r.adv_clean;

        const double cond_lhs = risk_u[0] + risk_u[1];
        if (cond_lhs - rhs < min_cond_margin) {
            min_cond_margin = cond_lhs - rhs;
            cond_worst = lower_bound_check("theorem3_conditional_risk", cond_lhs, rhs, true);
        }
        // The averaged-risk form does not follow from the triangle argument
        // (the per-attribute risks add, they do not average); it is tracked
        // here so violations are visible, but only the conditional form is
        // the exact assertion.
        if (risk < rhs - 1e-12 && total_holds) {
            total_holds = false;
            total_worst = lower_bound_check("theorem3_total_risk_form", risk, rhs, true);
        }
    }
    r.risk = bayes_risk;
    if (total_holds)
        total_worst = lower_bound_check("theorem3_total_risk_form", bayes_risk, -1.0, true);

    r.checks.push_back(upper_bound_check("theorem5_inference_cap", bayes_acc,
                                         theorem5_cap(h_bits), true));
    r.checks.push_back(cond_worst);
    total_worst.holds = total_holds;
    r.checks.push_back(total_worst);
    return r;
}

void export_projection(const ModelBundle& bundle, const Dataset& data, const std::string& path) {
    const Mat x_test = data.rows(data.test_idx);
    const std::vector<int> y_test = data.labels_at(data.test_idx);
    const std::vector<int> u_test = data.attrs_at(data.test_idx);
    const Mat z = representations(bundle, x_test);
    const Index n = z.rows, d = z.cols;

    // PCA via Jacobi eigen-decomposition of the (small) covariance matrix
    std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += z.at(i, j);
    for (auto& m : mean) m /= static_cast<double>(n);

    Mat cov(d, d);
    for (Index i = 0; i < n; ++i)
        for (Index a = 0; a < d; ++a)
            for (Index b = 0; b < d; ++b)
                cov.at(a, b) += (z.at(i, a) - mean[static_cast<std::size_t>(a)]) *
                                (z.at(i, b) - mean[static_cast<std::size_t>(b)]);
    for (auto& v : cov.v) v /= static_cast<double>(n);

    // cyclic Jacobi rotations; d <= 3 here so this converges immediately
    Mat vec(d, d);
    for (Index i = 0; i < d; ++i) vec.at(i, i) = 1.0;
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (Index p = 0; p < d; ++p)
            for (Index q = p + 1; q < d; ++q) off += cov.at(p, q) * cov.at(p, q);
        if (off < 1e-24) break;
        for (Index p = 0; p < d; ++p)
            for (Index q = p + 1; q < d; ++q) {
                if (std::abs(cov.at(p, q)) < 1e-18) continue;
                const double theta = 0.5 * std::atan2(2.0 * cov.at(p, q),
                                                      cov.at(q, q) - cov.at(p, p));
                const double c = std::cos(theta), s = std::sin(theta);
                for (Index k = 0; k < d; ++k) {
                    const double akp = cov.at(k, p), akq = cov.at(k, q);
                    cov.at(k, p) = c * akp - s * akq;
                    cov.at(k, q) = s * akp + c * akq;
                }
                for (Index k = 0; k < d; ++k) {
                    const double apk = cov.at(p, k), aqk = cov.at(q, k);
                    cov.at(p, k) = c * apk - s * aqk;
                    cov.at(q, k) = s * apk + c * aqk;
                }
                for (Index k = 0; k < d; ++k) {
                    const double vkp = vec.at(k, p), vkq = vec.at(k, q);
                    vec.at(k, p) = c * vkp - s * vkq;
                    vec.at(k, q) = s * vkp + c * vkq;
                }
            }
    }
    std::vector<Index> order(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&cov](Index a, Index b) { return cov.at(a, a) > cov.at(b, b); });

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "pc1,pc2,y,u\n";
    for (Index i = 0; i < n; ++i) {
        double pc[2] = {0.0, 0.0};
        for (int k = 0; k < 2; ++k) {
            if (k >= d) break;
            for (Index j = 0; j < d; ++j)
                pc[k] += (z.at(i, j) - mean[static_cast<std::size_t>(j)]) * vec.at(j, order[static_cast<std::size_t>(k)]);
        }
        os << format_double(pc[0]) << "," << format_double(pc[1]) << ","
           << y_test[static_cast<std::size_t>(i)] << "," << u_test[static_cast<std::size_t>(i)] << "\n";
    }

    std::string full_path = path;
    const auto dot = full_path.rfind(".csv");
    if (dot != std::string::npos && dot == full_path.size() - 4)
        full_path = full_path.substr(0, dot) + "_full.csv";
    else
        full_path += "_full";
    std::ofstream fs(full_path);
    if (!fs) throw std::runtime_error("cannot open for writing: " + full_path);
    for (Index j = 0; j < d; ++j) fs << "z" << j << ",";
    fs << "y,u\n";
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) fs << format_double(z.at(i, j)) << ",";
        fs << y_test[static_cast<std::size_t>(i)] << "," << u_test[static_cast<std::size_t>(i)] << "\n";
    }
}

} // namespace arprl
