#pragma once

#include <cstdint>
#include <string>
#include <vector>
#include <functional>

namespace arprl {

using Index = std::int64_t;

// Plain row-major matrix. Rank-2 covers every quantity in this project;
// scalars are (1,1) and row vectors (1,n).
struct Mat {
    Index rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(Index r, Index c) : rows(r), cols(c), v(static_cast<std::size_t>(r * c), 0.0) {}
    Mat(Index r, Index c, std::vector<double> data);

    double& at(Index r, Index c) { return v[static_cast<std::size_t>(r * cols + c)]; }
    double at(Index r, Index c) const { return v[static_cast<std::size_t>(r * cols + c)]; }
    Index size() const { return rows * cols; }
    std::string shape_str() const;
};

// Trainable buffer that outlives tapes. backward() accumulates into grad.
struct Param {
    Mat value;
    Mat grad;

    Param() = default;
    explicit Param(Mat m) : value(std::move(m)), grad(value.rows, value.cols) {}
    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

class Tape;

// Handle into a tape node. Cheap to copy; valid while the tape lives.
class Tensor {
public:
    Tensor() = default;

    Index rows() const;
    Index cols() const;
    Index size() const { return rows() * cols(); }
    const std::vector<double>& data() const;
    const std::vector<double>& grad() const;
    double scalar() const;
    Mat to_mat() const;
    Tape& tape() const { return *tape_; }
    int id() const { return id_; }

private:
    friend class Tape;
    Tensor(Tape* t, int id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

enum class OpKind : std::uint8_t {
    leaf, matmul, add, sub, mul, scale, add_const, neg,
    relu, sigmoid, tanh_fn, softplus, exp_fn, log_fn,
    logsumexp_rows, log_mean_exp, mean_all, sum_all,
    concat_cols, gather_rows, cross_entropy, cross_entropy_soft
};

// Define-by-run reverse-mode tape. Rebuilt for every forward pass; one
// thread per tape. Nodes are appended in topological order by construction,
// so backward() is a single reverse sweep that visits each node once.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // non-differentiable data leaf
    Tensor constant(const Mat& m);
    // differentiable leaf not tied to a Param (e.g. the perturbed input in PGD)
    Tensor leaf(const Mat& m);
    // leaf bound to a Param; its gradient is added to p.grad after backward
    Tensor param(Param& p);

    // Runs the reverse sweep from a scalar loss. Every node reachable from
    // a differentiable leaf gets a gradient; bound Params accumulate theirs
    // unless param accumulation is disabled (attack tapes want only the
    // input-leaf gradient and must leave the networks' grads untouched).
    void backward(const Tensor& loss);
    void set_param_accumulation(bool on) { accumulate_params_ = on; }

    std::size_t num_nodes() const { return nodes_.size(); }

    // Smallest |pre-activation| seen by any relu in this tape, +inf if none.
    // The finite-difference harness rejects instances too close to a kink
    // for central differences to be meaningful.
    double min_abs_relu_input() const;

    // internal node machinery, used by the op constructors below
    struct Node {
        Index rows = 0, cols = 0;
        std::vector<double> value;
        std::vector<double> grad;
        std::function<void(Tape&)> back; // empty for leaves
        bool needs_grad = false;
        Param* bound = nullptr;
        OpKind kind = OpKind::leaf;
    };

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    int push(Node n);
    Tensor handle(int id) { return Tensor(this, id); }
    std::vector<double>& grad_buf(int id);
    void note_relu_margin(double m) { relu_margins_.push_back(m); }

private:
    std::vector<Node> nodes_;
    std::vector<double> relu_margins_;
    bool ran_backward_ = false;
    bool accumulate_params_ = true;
};

// --- differentiable primitives ---
Tensor matmul(const Tensor& a, const Tensor& b);
// add: same shape, or b a (1,n) row broadcast over a's rows, or b scalar (1,1)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);           // same shape
Tensor mul(const Tensor& a, const Tensor& b);           // elementwise, same shape
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_fn(const Tensor& a);
Tensor softplus(const Tensor& a);                       // log(1 + exp(v)), overflow-safe
Tensor exp_fn(const Tensor& a);
Tensor log_fn(const Tensor& a);
Tensor logsumexp_rows(const Tensor& a);                 // (B,n) -> (B,1), max-shifted
Tensor log_mean_exp(const Tensor& a);                   // log(mean(exp(v))) over all entries, max-shifted
Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor gather_rows(const Tensor& a, const std::vector<Index>& order);
// fused softmax + cross-entropy, mean over rows; targets are class indices
Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets);
// same against one fixed target distribution shared by every row
Tensor cross_entropy_mean_soft(const Tensor& logits, const std::vector<double>& target_dist);

// scalar helpers shared across modules
double stable_softplus(double v);
double stable_sigmoid(double v);

} // namespace arprl
