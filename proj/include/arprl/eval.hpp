#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arprl/attack.hpp"
#include "arprl/data.hpp"
#include "arprl/mi.hpp"
#include "arprl/nn.hpp"

namespace arprl {

enum class ProbeTarget { label, attribute };

struct ProbeTrainConfig {
    int max_epochs = 200;
    double improve_tol = 1e-5; // stop when the 5-epoch loss improvement falls below this
    int window = 5;
    double lr = 0.1;
    int batch_size = 100;
};

// Trains a fresh head on frozen representations (task classifier or
// post-hoc attribute adversary) on the train split only.
Mlp fit_probe_classifier(const ModelBundle& bundle, const Dataset& data, ProbeTarget target,
                         std::uint64_t seed, const ProbeTrainConfig& cfg = {});

// representations of the given rows under the frozen learner, in chunks
Mat representations(const ModelBundle& bundle, const Mat& x);

// predicted class indices of a frozen probe on frozen representations
std::vector<int> probe_predictions(const Mlp& probe, const ModelBundle& bundle, const Mat& x);

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

// Task-loss PGD against probe(f(x)) for the whole matrix, chunked.
Mat adversarial_inputs(const Mlp& task_probe, const ModelBundle& bundle, const Mat& x,
                       const std::vector<int>& y, const AttackConfig& cfg);

// Worst-case attribute-inference advantage of a fixed adversary: the largest
// gap between its conditional prediction rates across the two attribute
// values, equal to the total-variation distance between them. Binary
// attributes only. x_adv, when given, evaluates on perturbed representations.
double compute_advantage(const Mlp& adversary, const ModelBundle& bundle, const Dataset& data,
                         const Mat* x_adv = nullptr);
// counts-based core, exposed for direct checks
double advantage_from_predictions(const std::vector<int>& pred, const std::vector<int>& attr);

struct MetricsReport {
    double alpha = 0.0, beta = 0.0;
    std::uint64_t seed = 0;
    double test_acc = 0.0;
    double robust_acc = 0.0;
    double infer_acc = 0.0;
    double majority_rate = 0.0;
    double infer_gap = 0.0; // infer_acc - majority_rate
    double advantage = 0.0;
    double advantage_perturbed = 0.0;
    AttackConfig attack;
};

MetricsReport evaluate_metrics(const ModelBundle& bundle, const Dataset& data,
                               const AttackConfig& attack, std::uint64_t seed);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& m);
void write_metrics_csv(const std::vector<MetricsReport>& rows, const std::string& path);

// --- trained MI estimation (MINE / JS critics) ---

struct CriticEstimatorConfig {
    int hidden = 64;
    int steps = 2000;
    int batch_size = 256;
    double lr = 0.02;
    double clip_norm = 10.0;
    int eval_permutations = 8;
};

// Trains a fresh scalar critic on (a, b[, attr]) pairs and returns the
// Donsker-Varadhan objective over the full sample (an MI lower-bound
// estimate in nats). Conditioning on an attribute means feeding it to the
// critic as an extra input.
double mine_estimate(const Mat& a, const Mat& b, const std::vector<int>* attr, int num_attr_values,
                     std::uint64_t seed, const CriticEstimatorConfig& cfg = {});

// Same protocol with the Jensen-Shannon objective; the returned score is a
// bounded dependence measure, not an MI estimate in nats.
double js_estimate(const Mat& a, const Mat& b, const std::vector<int>* attr, int num_attr_values,
                   std::uint64_t seed, const CriticEstimatorConfig& cfg = {});

struct RvEstimate {
    double mi_clean = 0.0; // I(x; z | u) estimate
    double mi_adv = 0.0;   // I(x'; z' | u) estimate
    double rv = 0.0;       // difference
};

// Representation vulnerability: worst-case in-ball perturbations from the
// alternating search, then fresh MINE critics on the clean and perturbed
// pairs. Uses local copies of the bundle's robustness critic for the search.
RvEstimate estimate_rv(const ModelBundle& bundle, const Dataset& data, const AttackConfig& attack,
                       std::uint64_t seed, const CriticEstimatorConfig& cfg = {});

// Upper bound on the Lipschitz constant of an MLP with 1-Lipschitz
// activations: the product of layer spectral norms (power iteration).
double estimate_lipschitz(const Mlp& net, int iterations = 100, double tol = 1e-9);

// attribute-inference accuracy cap 1 - H/(2 log2(6/H)) for H = H(u|z) in bits
double theorem5_cap(double h_bits);

struct TheoremCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0; // lhs - rhs for lower bounds, rhs - lhs for upper bounds
    bool holds = false;
    bool exact = false; // false = estimator-based quantities
};

struct BoundReport {
    double mi_clean = 0.0;
    double mi_adv = 0.0;
    double rv = 0.0;
    double delta_y_u = 0.0;
    double rep_norm_bound = 0.0; // R
    double lipschitz = 0.0;      // C_L
    double h_u_z_bits = 0.0;
    double risk = 0.0;
    double adv_risk = 0.0;
    double adv_clean = 0.0;
    double adv_perturbed = 0.0;
    double infer_acc = 0.0;
    std::vector<TheoremCheck> checks;
};

// All four theorem inequalities evaluated on a trained bundle with
// estimator-based quantities (flagged estimated, never exact).
BoundReport check_theorem_bounds(const ModelBundle& bundle, const Dataset& data,
                                 const AttackConfig& attack, std::uint64_t seed,
                                 const CriticEstimatorConfig& cfg = {});

std::string bound_report_text(const BoundReport& r);
void write_bound_report(const BoundReport& r, const std::string& csv_path,
                        const std::string& text_path);

// --- exact brute-force verification on finite alphabets ---

// joint over (z, y, u) with binary y and u and |Z| <= 8
struct DiscreteJoint3 {
    Index nz = 0;
    std::vector<double> p; // indexed [z][y][u]

    DiscreteJoint3(Index nz_) : nz(nz_), p(static_cast<std::size_t>(nz_ * 4), 0.0) {}
    double& at(Index z, int y, int u) { return p[static_cast<std::size_t>(z * 4 + y * 2 + u)]; }
    double at(Index z, int y, int u) const { return p[static_cast<std::size_t>(z * 4 + y * 2 + u)]; }
    void validate() const;
};

DiscreteJoint3 random_joint3(Index nz, Rng& rng);

// Exact enumeration: Bayes-optimal adversary for the privacy cap and every
// one of the 2^|Z| classifiers for the risk/advantage tradeoff, with the
// representation alphabet embedded at the given points (defines R and the
// per-classifier Lipschitz constant). The risk tradeoff is enforced in its
// per-attribute conditional form, which is what the Wasserstein triangle
// argument actually bounds; the total-risk average is reported alongside.
BoundReport check_bounds_discrete_oracle(const DiscreteJoint3& joint,
                                         const std::vector<double>& z_embedding);

// 2-component principal projection of the test-split representations, for
// external plotting. Writes <path> (pc1,pc2,y,u) and, next to it, the
// full-dimension representations with suffix "_full".
void export_projection(const ModelBundle& bundle, const Dataset& data, const std::string& path);

} // namespace arprl
