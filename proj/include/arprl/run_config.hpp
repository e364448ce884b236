#pragma once

#include <string>

#include "arprl/attack.hpp"
#include "arprl/config.hpp"

namespace arprl {

// Run configuration file: [data] / [model] / [train] / [attack] / [eval]
// sections with key = value lines. Unknown sections or keys are rejected.
// Values parsed here are validated before any compute starts.
struct RunConfig {
    // [data]
    std::string data_kind = "circles";
    std::string data_path;
    int data_n = 5000;
    std::uint64_t data_seed = 7;

    // [model]
    double lambda = 0.0;

    // [train]
    TrainConfig train;

    // [attack] — evaluation-time attack; the training search shares the
    // step schedule but budgets from [train] epsilon
    AttackConfig attack{0.01, 10, 0.1, AttackObjective::task_loss};

    // [eval]
    bool eval_bounds = false;
    int estimator_steps = 2000;
    bool export_projection = false;
};

RunConfig parse_run_config(const std::string& path);
void apply_run_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);
std::string render_run_config(const RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::string& path);

} // namespace arprl
