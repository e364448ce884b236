#pragma once

#include <cstdint>
#include <string>

namespace arprl {

enum class DatasetKind { toy, tabular };

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

// Everything the training loop needs. Defaults follow the experimental
// setup: batch size 100, 10 local steps, 50 global epochs, SGD at 1e-3.
struct TrainConfig {
    double alpha = 0.0;            // privacy weight
    double beta = 0.5;             // robustness weight; 1 - alpha - beta goes to utility
    double lambda = 0.0;           // optional task-head weight (0 = task-agnostic)
    double epsilon = 0.01;         // l-inf budget for the worst-case MI search
    double lr1 = 1e-3;             // privacy net (descend)
    double lr2 = 1e-3;             // robustness critic (ascend)
    double lr3 = 1e-3;             // utility critic (ascend)
    double lr4 = 1e-3;             // representation learner (ascend)
    double lr5 = 1e-3;             // task head, used when lambda > 0
    int batch_size = 100;
    int global_epochs = 50;
    int local_steps = 10;          // J
    int outer_rounds = 1;          // T
    std::uint64_t seed = 0;
    int pgd_steps = 10;
    double pgd_step_fraction = 0.1;
    double clip_norm = 10.0;       // global-norm gradient clip per update

    // Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
};

} // namespace arprl
