#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arprl/config.hpp"
#include "arprl/tensor.hpp"

namespace arprl {

enum class Activation { relu, tanh_act, none };
enum class OutputKind { none, sigmoid, softmax_logits };
enum class StepDirection { descend, ascend };

// Fully connected network. Layer i maps sizes[i] -> sizes[i+1] with weight
// shape (sizes[i], sizes[i+1]) and bias (1, sizes[i+1]).
struct Mlp {
    std::vector<int> sizes;
    std::vector<Param> weights;
    std::vector<Param> biases;
    Activation hidden = Activation::relu;
    OutputKind output = OutputKind::none;

    int input_dim() const { return sizes.front(); }
    int output_dim() const { return sizes.back(); }
    std::size_t num_layers() const { return weights.size(); }
    Index num_params() const;

    // x is (B, input_dim); returns (B, output_dim). For softmax_logits the
    // result is the raw logits (cross_entropy_mean applies the softmax).
    Tensor forward(Tape& tape, const Tensor& x);
    // Same computation with parameters bound as constants: no parameter
    // gradients accumulate, but gradients still flow through to x.
    Tensor forward_frozen(Tape& tape, const Tensor& x) const;

    std::vector<Param*> params();
    void zero_grads();
};

Mlp make_mlp(std::vector<int> sizes, Activation hidden, OutputKind output);

// Xavier-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases.
void init_params(Mlp& net, std::uint64_t seed);

// p <- p -/+ lr * grad per direction, then grads are zeroed.
void sgd_step(Mlp& net, double lr, StepDirection dir);

double grad_norm(Mlp& net);
// scales gradients so their global norm is at most max_norm
void clip_grad_norm(Mlp& net, double max_norm);

// The four networks of the min-max game plus the optional task head.
struct BundleMeta {
    DatasetKind kind = DatasetKind::toy;
    int input_dim = 0;
    int rep_dim = 0;
    int num_attr_values = 0;
    int num_classes = 0;
    int attr_width = 0; // 1 float for binary attributes, one-hot otherwise
};

struct ModelBundle {
    Mlp f;                       // representation learner
    Mlp g;                       // privacy (attribute inference) network
    Mlp t;                       // robustness critic (scalar output)
    Mlp h;                       // utility critic (scalar output)
    std::optional<Mlp> task_head;
    BundleMeta meta;
    TrainConfig config;          // snapshot of the run that produced it

    void zero_grads();
};

// Architectures per dataset kind:
//   toy:     f [in,10,2]   g [2,5,U]    t,h [in+2+attr_width, 64, 1]
//   tabular: f [in,12,3]   g [3,16,U]   t,h [in+3+attr_width, 64, 1]
// Critics score (x, z, u) jointly and must be scalar-valued, so their last
// layer has width 1 with the table's output width kept as the hidden layer.
ModelBundle build_default_networks(DatasetKind kind, int input_dim, int num_attr_values,
                                   int num_classes);

void init_bundle(ModelBundle& b, std::uint64_t seed);

// Plain-text checkpoint, round-trip exact (shortest float representation).
void save_checkpoint(const ModelBundle& b, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

// locale-independent shortest-representation float formatting
std::string format_double(double d);
double parse_double(const std::string& s);

} // namespace arprl
