#include "arprl/nn.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "arprl/rng.hpp"

namespace arprl {

std::string to_string(DatasetKind k) {
    return k == DatasetKind::toy ? "toy" : "tabular";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "toy") return DatasetKind::toy;
    if (s == "tabular") return DatasetKind::tabular;
    throw std::invalid_argument("unknown dataset kind: '" + s + "' (expected toy or tabular)");
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("TrainConfig: " + msg); };
    if (alpha < 0.0 || alpha > 1.0) fail("alpha must be in [0,1], got " + std::to_string(alpha));
    if (beta < 0.0 || beta > 1.0) fail("beta must be in [0,1], got " + std::to_string(beta));
    if (alpha + beta > 1.0 + 1e-12)
        fail("alpha + beta must be <= 1, got " + std::to_string(alpha + beta));
    if (lambda < 0.0) fail("lambda must be >= 0");
    if (epsilon < 0.0) fail("epsilon must be >= 0");
    for (double lr : {lr1, lr2, lr3, lr4, lr5})
        if (!(lr > 0.0)) fail("learning rates must be > 0");
    if (batch_size < 2) fail("batch_size must be >= 2 (MINE needs at least two samples)");
    if (global_epochs < 1) fail("global_epochs must be >= 1");
    if (local_steps < 1) fail("local_steps must be >= 1");
    if (outer_rounds < 1) fail("outer_rounds must be >= 1");
    if (pgd_steps < 0) fail("pgd_steps must be >= 0");
    if (!(pgd_step_fraction > 0.0) || pgd_step_fraction > 1.0)
        fail("pgd_step_fraction must be in (0,1]");
    if (!(clip_norm > 0.0)) fail("clip_norm must be > 0");
}

Index Mlp::num_params() const {
    Index n = 0;
    for (const auto& w : weights) n += w.value.size();
    for (const auto& b : biases) n += b.value.size();
    return n;
}

namespace {

Tensor forward_impl(const Mlp& net, Tape& tape, const Tensor& x,
                    const std::function<Tensor(std::size_t, bool)>& bind) {
    if (x.cols() != net.input_dim())
        throw std::invalid_argument("Mlp::forward: input has " + std::to_string(x.cols()) +
                                    " features, network expects " + std::to_string(net.input_dim()));
    Tensor hid = x;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        hid = add(matmul(hid, bind(l, true)), bind(l, false));
        const bool last = (l + 1 == net.weights.size());
        if (!last) {
            switch (net.hidden) {
                case Activation::relu: hid = relu(hid); break;
                case Activation::tanh_act: hid = tanh_fn(hid); break;
                case Activation::none: break;
            }
        } else if (net.output == OutputKind::sigmoid) {
            hid = sigmoid(hid);
        }
    }
    return hid;
}

} // namespace

Tensor Mlp::forward(Tape& tape, const Tensor& x) {
    return forward_impl(*this, tape, x, [this, &tape](std::size_t l, bool weight) {
        return tape.param(weight ? weights[l] : biases[l]);
    });
}

Tensor Mlp::forward_frozen(Tape& tape, const Tensor& x) const {
    return forward_impl(*this, tape, x, [this, &tape](std::size_t l, bool weight) {
        return tape.constant(weight ? weights[l].value : biases[l].value);
    });
}

std::vector<Param*> Mlp::params() {
    std::vector<Param*> out;
    out.reserve(weights.size() + biases.size());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

void Mlp::zero_grads() {
    for (Param* p : params()) p->zero_grad();
}

Mlp make_mlp(std::vector<int> sizes, Activation hidden, OutputKind output) {
    if (sizes.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output sizes");
    for (int s : sizes)
        if (s < 1) throw std::invalid_argument("make_mlp: layer sizes must be >= 1");
    Mlp net;
    net.sizes = std::move(sizes);
    net.hidden = hidden;
    net.output = output;
    for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
        net.weights.emplace_back(Mat(net.sizes[l], net.sizes[l + 1]));
        net.biases.emplace_back(Mat(1, net.sizes[l + 1]));
    }
    return net;
}

void init_params(Mlp& net, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const double fan_in = static_cast<double>(net.sizes[l]);
        const double fan_out = static_cast<double>(net.sizes[l + 1]);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& w : net.weights[l].value.v) w = rng.uniform(-bound, bound);
        for (auto& b : net.biases[l].value.v) b = 0.0;
        net.weights[l].zero_grad();
        net.biases[l].zero_grad();
    }
}

void sgd_step(Mlp& net, double lr, StepDirection dir) {
    // an all-zero gradient is legal and leaves the parameters unchanged
    const double sign = (dir == StepDirection::descend) ? -1.0 : 1.0;
    for (Param* p : net.params()) {
        for (std::size_t i = 0; i < p->value.v.size(); ++i)
            p->value.v[i] += sign * lr * p->grad.v[i];
        p->zero_grad();
    }
}

double grad_norm(Mlp& net) {
    double s = 0.0;
    for (Param* p : net.params())
        for (double g : p->grad.v) s += g * g;
    return std::sqrt(s);
}

void clip_grad_norm(Mlp& net, double max_norm) {
    const double n = grad_norm(net);
    if (n <= max_norm || n == 0.0) return;
    const double f = max_norm / n;
    for (Param* p : net.params())
        for (double& g : p->grad.v) g *= f;
}

void ModelBundle::zero_grads() {
    f.zero_grads();
    g.zero_grads();
    t.zero_grads();
    h.zero_grads();
    if (task_head) task_head->zero_grads();
}

ModelBundle build_default_networks(DatasetKind kind, int input_dim, int num_attr_values,
                                   int num_classes) {
    if (input_dim < 1 || num_attr_values < 1 || num_classes < 1)
        throw std::invalid_argument("build_default_networks: dims must be >= 1");
    ModelBundle b;
    b.meta.kind = kind;
    b.meta.input_dim = input_dim;
    b.meta.num_attr_values = num_attr_values;
    b.meta.num_classes = num_classes;
    b.meta.attr_width = (num_attr_values == 2) ? 1 : num_attr_values;

    const int rep = (kind == DatasetKind::toy) ? 2 : 3;
    const int f_hidden = (kind == DatasetKind::toy) ? 10 : 12;
    const int g_hidden = (kind == DatasetKind::toy) ? 5 : 16;
    b.meta.rep_dim = rep;

    const int critic_in = input_dim + rep + b.meta.attr_width;
    b.f = make_mlp({input_dim, f_hidden, rep}, Activation::relu, OutputKind::none);
    b.g = make_mlp({rep, g_hidden, num_attr_values}, Activation::relu, OutputKind::softmax_logits);
    b.t = make_mlp({critic_in, 64, 1}, Activation::relu, OutputKind::none);
    b.h = make_mlp({critic_in, 64, 1}, Activation::relu, OutputKind::none);
    return b;
}

void init_bundle(ModelBundle& b, std::uint64_t seed) {
    init_params(b.f, derive_seed(seed, {1}));
    init_params(b.g, derive_seed(seed, {2}));
    init_params(b.t, derive_seed(seed, {3}));
    init_params(b.h, derive_seed(seed, {4}));
    if (b.task_head) init_params(*b.task_head, derive_seed(seed, {5}));
}

std::string format_double(double d) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), d);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double d = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), d);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("cannot parse float: '" + s + "'");
    return d;
}

namespace {

void write_net(std::ostream& os, const std::string& name, const Mlp& net) {
    os << "net " << name << " " << net.sizes.size();
    for (int s : net.sizes) os << " " << s;
    os << "\n";
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        bool first = true;
        for (double w : net.weights[l].value.v) {
            os << (first ? "" : " ") << format_double(w);
            first = false;
        }
        for (double b : net.biases[l].value.v) os << " " << format_double(b);
        os << "\n";
    }
}

void read_net(std::istream& is, const std::string& expect_name, Mlp& net) {
    std::string tag, name;
    std::size_t nsizes = 0;
    if (!(is >> tag >> name >> nsizes) || tag != "net" || name != expect_name)
        throw std::runtime_error("checkpoint: expected 'net " + expect_name + "' block");
    std::vector<int> sizes(nsizes);
    for (auto& s : sizes)
        if (!(is >> s)) throw std::runtime_error("checkpoint: truncated size list");
    if (sizes != net.sizes)
        throw std::runtime_error("checkpoint: layer sizes for '" + expect_name +
                                 "' do not match the architecture");
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        std::string tok;
        for (auto& w : net.weights[l].value.v) {
            if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated parameters");
            w = parse_double(tok);
        }
        for (auto& b : net.biases[l].value.v) {
            if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated parameters");
            b = parse_double(tok);
        }
    }
}

} // namespace

void save_checkpoint(const ModelBundle& b, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os << "arprl-ckpt v1\n";
    os << "meta " << to_string(b.meta.kind) << " " << b.meta.input_dim << " " << b.meta.rep_dim
       << " " << b.meta.num_attr_values << " " << b.meta.num_classes << " " << b.meta.attr_width
       << " " << (b.task_head ? 1 : 0) << "\n";
    const TrainConfig& c = b.config;
    os << "cfg " << format_double(c.alpha) << " " << format_double(c.beta) << " "
       << format_double(c.lambda) << " " << format_double(c.epsilon) << " "
       << format_double(c.lr1) << " " << format_double(c.lr2) << " " << format_double(c.lr3)
       << " " << format_double(c.lr4) << " " << format_double(c.lr5) << " " << c.batch_size
       << " " << c.global_epochs << " " << c.local_steps << " " << c.outer_rounds << " "
       << c.seed << " " << c.pgd_steps << " " << format_double(c.pgd_step_fraction) << " "
       << format_double(c.clip_norm) << "\n";
    write_net(os, "f", b.f);
    write_net(os, "g", b.g);
    write_net(os, "t", b.t);
    write_net(os, "h", b.h);
    if (b.task_head) write_net(os, "task", *b.task_head);
    if (!os) throw std::runtime_error("write failed: " + path);
}

ModelBundle load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string header;
    std::getline(is, header);
    if (header != "arprl-ckpt v1")
        throw std::runtime_error("checkpoint " + path + ": bad header '" + header + "'");

    std::string tag, kind_s;
    int input_dim = 0, rep_dim = 0, num_attr = 0, num_classes = 0, attr_width = 0, has_task = 0;
    if (!(is >> tag >> kind_s >> input_dim >> rep_dim >> num_attr >> num_classes >> attr_width >>
          has_task) ||
        tag != "meta")
        throw std::runtime_error("checkpoint " + path + ": bad meta line");

    ModelBundle b = build_default_networks(dataset_kind_from_string(kind_s), input_dim, num_attr,
                                           num_classes);
    TrainConfig& c = b.config;
    std::string tok;
    auto next_d = [&is, &tok, &path]() {
        if (!(is >> tok)) throw std::runtime_error("checkpoint " + path + ": truncated cfg line");
        return parse_double(tok);
    };
    if (!(is >> tag) || tag != "cfg") throw std::runtime_error("checkpoint " + path + ": bad cfg line");
    c.alpha = next_d();
    c.beta = next_d();
    c.lambda = next_d();
    c.epsilon = next_d();
    c.lr1 = next_d();
    c.lr2 = next_d();
    c.lr3 = next_d();
    c.lr4 = next_d();
    c.lr5 = next_d();
    is >> c.batch_size >> c.global_epochs >> c.local_steps >> c.outer_rounds >> c.seed >>
        c.pgd_steps;
    c.pgd_step_fraction = next_d();
    c.clip_norm = next_d();

    read_net(is, "f", b.f);
    read_net(is, "g", b.g);
    read_net(is, "t", b.t);
    read_net(is, "h", b.h);
    if (has_task) {
        b.task_head = make_mlp({rep_dim, num_classes}, Activation::relu, OutputKind::softmax_logits);
        read_net(is, "task", *b.task_head);
    }
    return b;
}

} // namespace arprl
