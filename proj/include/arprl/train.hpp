#pragma once

#include <functional>
#include <string>
#include <vector>

#include "arprl/attack.hpp"
#include "arprl/config.hpp"
#include "arprl/data.hpp"
#include "arprl/nn.hpp"

namespace arprl {

struct EpochRow {
    int epoch = 0;
    double l1 = 0.0;
    double l2 = 0.0;
    double l3 = 0.0;
    double objective = 0.0;
};

// Per-batch measurements handed to an optional observer; used by the
// property tests to watch the adversarial game from outside.
struct BatchEvent {
    int epoch = 0;
    Index batch_index = 0;
    double l1_before_inner = 0.0;
    double l1_after_inner = 0.0;   // same batch after the privacy-net steps
    double l1_before_theta = 0.0;
    double l1_after_theta = 0.0;   // same batch after the representation step
    double l2_clean = 0.0;
    double l2_adv = 0.0;           // worst-case objective, same critic
    double attack_linf = 0.0;
};

using BatchObserver = std::function<void(const BatchEvent&)>;

struct TrainResult {
    ModelBundle bundle;
    std::vector<EpochRow> log;
};

// The alternating min-max loop. Per batch: J descent steps on the privacy
// net and J ascent steps on the utility critic; the worst-case MI search
// supplies J ascent steps on the robustness critic plus the PGD hunt for
// the in-ball perturbations; then one ascent step on the representation
// learner over alpha*L1 + beta*L2(perturbed) + (1-alpha-beta)*(L3 + lambda*LL).
// If out_dir is non-empty, writes training_log.csv and checkpoints there
// (every 10 epochs and at completion). Deterministic in config.seed.
TrainResult train(const Dataset& data, const TrainConfig& config, const std::string& out_dir = "",
                  const BatchObserver& observer = nullptr);

void write_epoch_log(const std::vector<EpochRow>& log, const std::string& path);

struct ProbeRow {
    double alpha = 0.0;
    double beta = 0.0;
    double test_acc = 0.0;
    double robust_acc = 0.0;
    double infer_acc = 0.0;
    double score = 0.0;
    std::string stage; // "ceiling", "probe", "refine"
};

struct TuneResult {
    double alpha = 0.0;
    double beta = 0.0;
    std::vector<ProbeRow> probes;
};

// Hyperparameter search for the privacy/robustness weights: establish the
// utility ceiling at alpha=beta=0, probe equal / privacy-heavy /
// robustness-heavy splits of a fixed non-utility budget, then refine by
// bisection along the winning direction. Throws when target_utility exceeds
// the ceiling. `budget` is alpha+beta (the utility weight stays 1-budget).
TuneResult tune_alpha_beta(const Dataset& data, double target_utility, const TrainConfig& base,
                           double budget = 0.2, int refine_rounds = 2,
                           const std::string& log_path = "");

} // namespace arprl
