#include "arprl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace arprl {

Mat::Mat(Index r, Index c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
    if (static_cast<std::size_t>(rows * cols) != v.size())
        throw std::invalid_argument("Mat: " + std::to_string(v.size()) + " values do not fill shape " + shape_str());
}

std::string Mat::shape_str() const {
    return "(" + std::to_string(rows) + ", " + std::to_string(cols) + ")";
}

namespace {

std::string shape_str(Index r, Index c) {
    return "(" + std::to_string(r) + ", " + std::to_string(c) + ")";
}

[[noreturn]] void shape_error(const char* op, Index ar, Index ac, Index br, Index bc) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(ar, ac) +
                                " and " + shape_str(br, bc));
}

} // namespace

Index Tensor::rows() const { return tape_->node(id_).rows; }
Index Tensor::cols() const { return tape_->node(id_).cols; }
const std::vector<double>& Tensor::data() const { return tape_->node(id_).value; }
const std::vector<double>& Tensor::grad() const { return tape_->node(id_).grad; }

double Tensor::scalar() const {
    if (size() != 1)
        throw std::invalid_argument("Tensor::scalar: shape is " + shape_str(rows(), cols()) + ", not (1, 1)");
    return data()[0];
}

Mat Tensor::to_mat() const { return Mat(rows(), cols(), data()); }

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

std::vector<double>& Tape::grad_buf(int id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

Tensor Tape::constant(const Mat& m) {
    Node n;
    n.rows = m.rows;
    n.cols = m.cols;
    n.value = m.v;
    n.needs_grad = false;
    return handle(push(std::move(n)));
}

Tensor Tape::leaf(const Mat& m) {
    Node n;
    n.rows = m.rows;
    n.cols = m.cols;
    n.value = m.v;
    n.needs_grad = true;
    return handle(push(std::move(n)));
}

Tensor Tape::param(Param& p) {
    Node n;
    n.rows = p.value.rows;
    n.cols = p.value.cols;
    n.value = p.value.v;
    n.needs_grad = true;
    n.bound = &p;
    return handle(push(std::move(n)));
}

void Tape::backward(const Tensor& loss) {
    if (nodes_.empty()) throw std::runtime_error("backward: empty tape");
    if (loss.tape_ != this) throw std::invalid_argument("backward: loss belongs to a different tape");
    if (ran_backward_) throw std::runtime_error("backward: tape already swept");
    const Node& ln = node(loss.id_);
    if (ln.rows != 1 || ln.cols != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(ln.rows, ln.cols));
    ran_backward_ = true;

    grad_buf(loss.id_)[0] = 1.0;
    for (int i = loss.id_; i >= 0; --i) {
        Node& n = node(i);
        if (!n.needs_grad || n.grad.empty() || !n.back) continue;
        n.back(*this);
    }
    if (!accumulate_params_) return;
    for (auto& n : nodes_) {
        if (n.bound && !n.grad.empty()) {
            for (std::size_t k = 0; k < n.grad.size(); ++k) n.bound->grad.v[k] += n.grad[k];
        }
    }
}

double Tape::min_abs_relu_input() const {
    double m = std::numeric_limits<double>::infinity();
    for (double x : relu_margins_) m = std::min(m, x);
    return m;
}

// --- op construction helpers ---

// Each op: validate shapes, compute value, record a closure that routes the
// output gradient to the inputs. Closures only touch grad buffers of nodes
// that need a gradient.

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument("matmul: operands on different tapes");
    Tape& t = a.tape();
    const Index m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) shape_error("matmul", m, k, k2, n);

    Tape::Node out;
    out.rows = m;
    out.cols = n;
    out.value.assign(static_cast<std::size_t>(m * n), 0.0);
    out.kind = OpKind::matmul;
    const double* av = t.node(a.id()).value.data();
    const double* bv = t.node(b.id()).value.data();
    double* cv = out.value.data();
    for (Index i = 0; i < m; ++i)
        for (Index p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = bv + p * n;
            double* crow = cv + i * n;
            for (Index j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    out.needs_grad = t.node(a.id()).needs_grad || t.node(b.id()).needs_grad;
    const int aid = a.id(), bid = b.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [aid, bid, oid, m, k, n](Tape& tp) {
            const std::vector<double>& g = tp.node(oid).grad;
            if (tp.node(aid).needs_grad) {
                std::vector<double>& ga = tp.grad_buf(aid);
                const double* bv2 = tp.node(bid).value.data();
                for (Index i = 0; i < m; ++i)
                    for (Index p = 0; p < k; ++p) {
                        double s = 0.0;
                        const double* grow = g.data() + i * n;
                        const double* brow = bv2 + p * n;
                        for (Index j = 0; j < n; ++j) s += grow[j] * brow[j];
                        ga[static_cast<std::size_t>(i * k + p)] += s;
                    }
            }
            if (tp.node(bid).needs_grad) {
                std::vector<double>& gb = tp.grad_buf(bid);
                const double* av2 = tp.node(aid).value.data();
                for (Index i = 0; i < m; ++i)
                    for (Index p = 0; p < k; ++p) {
                        const double aip = av2[i * k + p];
                        const double* grow = g.data() + i * n;
                        double* gbrow = gb.data() + p * n;
                        for (Index j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                    }
            }
        };
    }
    return t.handle(t.push(std::move(out)));
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument("add: operands on different tapes");
    Tape& t = a.tape();
    const Index r = a.rows(), c = a.cols(), br = b.rows(), bc = b.cols();
    const bool same = (br == r && bc == c);
    const bool row_bcast = (br == 1 && bc == c && !same);
    const bool scalar_bcast = (br == 1 && bc == 1 && !same && !row_bcast);
    if (!same && !row_bcast && !scalar_bcast) shape_error("add", r, c, br, bc);

    Tape::Node out;
    out.rows = r;
    out.cols = c;
    out.value = t.node(a.id()).value;
    out.kind = OpKind::add;
    const std::vector<double>& bv = t.node(b.id()).value;
    if (same) {
        for (std::size_t i = 0; i < out.value.size(); ++i) out.value[i] += bv[i];
    } else if (row_bcast) {
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) out.value[static_cast<std::size_t>(i * c + j)] += bv[static_cast<std::size_t>(j)];
    } else {
        for (auto& x : out.value) x += bv[0];
    }
    out.needs_grad = t.node(a.id()).needs_grad || t.node(b.id()).needs_grad;
    const int aid = a.id(), bid = b.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [aid, bid, oid, r, c, same, row_bcast](Tape& tp) {
            const std::vector<double>& g = tp.node(oid).grad;
            if (tp.node(aid).needs_grad) {
                std::vector<double>& ga = tp.grad_buf(aid);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (tp.node(bid).needs_grad) {
                std::vector<double>& gb = tp.grad_buf(bid);
                if (same) {
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                } else if (row_bcast) {
                    for (Index i = 0; i < r; ++i)
                        for (Index j = 0; j < c; ++j) gb[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i * c + j)];
                } else {
                    double s = 0.0;
                    for (double x : g) s += x;
                    gb[0] += s;
                }
            }
        };
    }
    return t.handle(t.push(std::move(out)));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument("sub: operands on different tapes");
    Tape& t = a.tape();
    if (a.rows() != b.rows() || a.cols() != b.cols())
        shape_error("sub", a.rows(), a.cols(), b.rows(), b.cols());
    Tape::Node out;
    out.rows = a.rows();
    out.cols = a.cols();
    out.value = t.node(a.id()).value;
    out.kind = OpKind::sub;
    const std::vector<double>& bv = t.node(b.id()).value;
    for (std::size_t i = 0; i < out.value.size(); ++i) out.value[i] -= bv[i];
    out.needs_grad = t.node(a.id()).needs_grad || t.node(b.id()).needs_grad;
    const int aid = a.id(), bid = b.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [aid, bid, oid](Tape& tp) {
            const std::vector<double>& g = tp.node(oid).grad;
            if (tp.node(aid).needs_grad) {
                std::vector<double>& ga = tp.grad_buf(aid);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (tp.node(bid).needs_grad) {
                std::vector<double>& gb = tp.grad_buf(bid);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        };
    }
    return t.handle(t.push(std::move(out)));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument("mul: operands on different tapes");
    Tape& t = a.tape();
    if (a.rows() != b.rows() || a.cols() != b.cols())
        shape_error("mul", a.rows(), a.cols(), b.rows(), b.cols());
    Tape::Node out;
    out.rows = a.rows();
    out.cols = a.cols();
    out.value = t.node(a.id()).value;
    out.kind = OpKind::mul;
    const std::vector<double>& bv = t.node(b.id()).value;
    for (std::size_t i = 0; i < out.value.size(); ++i) out.value[i] *= bv[i];
    out.needs_grad = t.node(a.id()).needs_grad || t.node(b.id()).needs_grad;
    const int aid = a.id(), bid = b.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [aid, bid, oid](Tape& tp) {
            const std::vector<double>& g = tp.node(oid).grad;
            if (tp.node(aid).needs_grad) {
                std::vector<double>& ga = tp.grad_buf(aid);
                const std::vector<double>& bv2 = tp.node(bid).value;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
            }
            if (tp.node(bid).needs_grad) {
                std::vector<double>& gb = tp.grad_buf(bid);
                const std::vector<double>& av2 = tp.node(aid).value;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
            }
        };
    }
    return t.handle(t.push(std::move(out)));
}

namespace {

// shared scaffolding for elementwise unary ops: f(value), df consumes the
// *output* and *input* values so each op picks whichever is cheaper
template <typename F, typename DF>
Tensor unary_op(const Tensor& a, OpKind kind, F f, DF df) {
    Tape& t = a.tape();
    Tape::Node out;
    out.rows = a.rows();
    out.cols = a.cols();
    out.kind = kind;
    const std::vector<double>& av = a.data();
    out.value.resize(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out.value[i] = f(av[i]);
    out.needs_grad = t.node(a.id()).needs_grad;
    const int aid = a.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [aid, oid, df](Tape& tp) {
            const std::vector<double>& g = tp.node(oid).grad;
            const std::vector<double>& ov = tp.node(oid).value;
            const std::vector<double>& iv = tp.node(aid).value;
            std::vector<double>& ga = tp.grad_buf(aid);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(iv[i], ov[i]);
        };
    }
    return t.handle(t.push(std::move(out)));
}

} // namespace

double stable_softplus(double v) {
    // log(1 + e^v) = max(v, 0) + log1p(e^{-|v|})
    return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
}

double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

Tensor scale(const Tensor& a, double c) {
    return unary_op(a, OpKind::scale,
                    [c](double x) { return c * x; },
                    [c](double, double) { return c; });
}

Tensor add_const(const Tensor& a, double c) {
    return unary_op(a, OpKind::add_const,
                    [c](double x) { return x + c; },
                    [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) {
    return unary_op(a, OpKind::neg,
                    [](double x) { return -x; },
                    [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& a) {
    Tape& t = a.tape();
    double margin = std::numeric_limits<double>::infinity();
    for (double x : a.data()) margin = std::min(margin, std::abs(x));
    t.note_relu_margin(margin);
    return unary_op(a, OpKind::relu,
                    [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(a, OpKind::sigmoid,
                    [](double x) { return stable_sigmoid(x); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_fn(const Tensor& a) {
    return unary_op(a, OpKind::tanh_fn,
                    [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& a) {
    return unary_op(a, OpKind::softplus,
                    [](double x) { return stable_softplus(x); },
                    [](double x, double) { return stable_sigmoid(x); });
}

Tensor exp_fn(const Tensor& a) {
    return unary_op(a, OpKind::exp_fn,
                    [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor log_fn(const Tensor& a) {
    return unary_op(a, OpKind::log_fn,
                    [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor logsumexp_rows(const Tensor& a) {
    Tape& t = a.tape();
    const Index r = a.rows(), c = a.cols();
    Tape::Node out;
    out.rows = r;
    out.cols = 1;
    out.kind = OpKind::logsumexp_rows;
    out.value.resize(static_cast<std::size_t>(r));
    const std::vector<double>& av = a.data();
    for (Index i = 0; i < r; ++i) {
        const double* row = av.data() + i * c;
        double m = row[0];
        for (Index j = 1; j < c; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (Index j = 0; j < c; ++j) s += std::exp(row[j] - m);
        out.value[static_cast<std::size_t>(i)] = m + std::log(s);
    }
    out.needs_grad = t.node(a.id()).needs_grad;
    const int aid = a.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [aid, oid, r, c](Tape& tp) {
            const std::vector<double>& g = tp.node(oid).grad;
            const std::vector<double>& lse = tp.node(oid).value;
            const std::vector<double>& iv = tp.node(aid).value;
            std::vector<double>& ga = tp.grad_buf(aid);
            for (Index i = 0; i < r; ++i) {
                const double gi = g[static_cast<std::size_t>(i)];
                if (gi == 0.0) continue;
                for (Index j = 0; j < c; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i * c + j);
                    ga[k] += gi * std::exp(iv[k] - lse[static_cast<std::size_t>(i)]);
                }
            }
        };
    }
    return t.handle(t.push(std::move(out)));
}

Tensor log_mean_exp(const Tensor& a) {
    Tape& t = a.tape();
    Tape::Node out;
    out.rows = 1;
    out.cols = 1;
    out.kind = OpKind::log_mean_exp;
    const std::vector<double>& av = a.data();
    const std::size_t n = av.size();
    double m = av[0];
    for (double x : av) m = std::max(m, x);
    double s = 0.0;
    for (double x : av) s += std::exp(x - m);
    out.value = {m + std::log(s) - std::log(static_cast<double>(n))};
    out.needs_grad = t.node(a.id()).needs_grad;
    const int aid = a.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        // d/dv_i log(mean(exp v)) = exp(v_i - m) / sum(exp(v - m))
        out.back = [aid, oid, m](Tape& tp) {
            const double g = tp.node(oid).grad[0];
            if (g == 0.0) return;
            const std::vector<double>& iv = tp.node(aid).value;
            std::vector<double>& ga = tp.grad_buf(aid);
            double s2 = 0.0;
            for (double x : iv) s2 += std::exp(x - m);
            for (std::size_t i = 0; i < iv.size(); ++i) ga[i] += g * std::exp(iv[i] - m) / s2;
        };
    }
    return t.handle(t.push(std::move(out)));
}

namespace {

Tensor reduce_all(const Tensor& a, OpKind kind, double denom) {
    Tape& t = a.tape();
    Tape::Node out;
    out.rows = 1;
    out.cols = 1;
    out.kind = kind;
    double s = 0.0;
    for (double x : a.data()) s += x;
    out.value = {s / denom};
    out.needs_grad = t.node(a.id()).needs_grad;
    const int aid = a.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [aid, oid, denom](Tape& tp) {
            const double g = tp.node(oid).grad[0] / denom;
            std::vector<double>& ga = tp.grad_buf(aid);
            for (auto& x : ga) x += g;
        };
    }
    return t.handle(t.push(std::move(out)));
}

} // namespace

Tensor mean_all(const Tensor& a) { return reduce_all(a, OpKind::mean_all, static_cast<double>(a.size())); }
Tensor sum_all(const Tensor& a) { return reduce_all(a, OpKind::sum_all, 1.0); }

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument("concat_cols: operands on different tapes");
    Tape& t = a.tape();
    if (a.rows() != b.rows()) shape_error("concat_cols", a.rows(), a.cols(), b.rows(), b.cols());
    const Index r = a.rows(), ca = a.cols(), cb = b.cols();
    Tape::Node out;
    out.rows = r;
    out.cols = ca + cb;
    out.kind = OpKind::concat_cols;
    out.value.resize(static_cast<std::size_t>(r * (ca + cb)));
    const std::vector<double>& av = a.data();
    const std::vector<double>& bv = b.data();
    for (Index i = 0; i < r; ++i) {
        std::copy_n(av.data() + i * ca, ca, out.value.data() + i * (ca + cb));
        std::copy_n(bv.data() + i * cb, cb, out.value.data() + i * (ca + cb) + ca);
    }
    out.needs_grad = t.node(a.id()).needs_grad || t.node(b.id()).needs_grad;
    const int aid = a.id(), bid = b.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [aid, bid, oid, r, ca, cb](Tape& tp) {
            const std::vector<double>& g = tp.node(oid).grad;
            if (tp.node(aid).needs_grad) {
                std::vector<double>& ga = tp.grad_buf(aid);
                for (Index i = 0; i < r; ++i)
                    for (Index j = 0; j < ca; ++j)
                        ga[static_cast<std::size_t>(i * ca + j)] += g[static_cast<std::size_t>(i * (ca + cb) + j)];
            }
            if (tp.node(bid).needs_grad) {
                std::vector<double>& gb = tp.grad_buf(bid);
                for (Index i = 0; i < r; ++i)
                    for (Index j = 0; j < cb; ++j)
                        gb[static_cast<std::size_t>(i * cb + j)] += g[static_cast<std::size_t>(i * (ca + cb) + ca + j)];
            }
        };
    }
    return t.handle(t.push(std::move(out)));
}

Tensor gather_rows(const Tensor& a, const std::vector<Index>& order) {
    Tape& t = a.tape();
    const Index r = a.rows(), c = a.cols();
    for (Index idx : order)
        if (idx < 0 || idx >= r)
            throw std::invalid_argument("gather_rows: index " + std::to_string(idx) + " out of range for " +
                                        std::to_string(r) + " rows");
    Tape::Node out;
    out.rows = static_cast<Index>(order.size());
    out.cols = c;
    out.kind = OpKind::gather_rows;
    out.value.resize(order.size() * static_cast<std::size_t>(c));
    const std::vector<double>& av = a.data();
    for (std::size_t i = 0; i < order.size(); ++i)
        std::copy_n(av.data() + order[i] * c, c, out.value.data() + static_cast<Index>(i) * c);
    out.needs_grad = t.node(a.id()).needs_grad;
    const int aid = a.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [aid, oid, order, c](Tape& tp) {
            const std::vector<double>& g = tp.node(oid).grad;
            std::vector<double>& ga = tp.grad_buf(aid);
            for (std::size_t i = 0; i < order.size(); ++i)
                for (Index j = 0; j < c; ++j)
                    ga[static_cast<std::size_t>(order[i] * c + j)] += g[i * static_cast<std::size_t>(c) + static_cast<std::size_t>(j)];
        };
    }
    return t.handle(t.push(std::move(out)));
}

Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets) {
    Tape& t = logits.tape();
    const Index r = logits.rows(), c = logits.cols();
    if (static_cast<Index>(targets.size()) != r)
        throw std::invalid_argument("cross_entropy_mean: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(r) + " rows");
    for (int y : targets)
        if (y < 0 || y >= c)
            throw std::invalid_argument("cross_entropy_mean: class index " + std::to_string(y) +
                                        " out of range [0, " + std::to_string(c) + ")");
    Tape::Node out;
    out.rows = 1;
    out.cols = 1;
    out.kind = OpKind::cross_entropy;
    const std::vector<double>& lv = logits.data();
    // cache softmax probabilities for the backward pass
    std::vector<double> probs(lv.size());
    double total = 0.0;
    for (Index i = 0; i < r; ++i) {
        const double* row = lv.data() + i * c;
        double m = row[0];
        for (Index j = 1; j < c; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (Index j = 0; j < c; ++j) s += std::exp(row[j] - m);
        const double lse = m + std::log(s);
        for (Index j = 0; j < c; ++j)
            probs[static_cast<std::size_t>(i * c + j)] = std::exp(row[j] - lse);
        total += lse - row[targets[static_cast<std::size_t>(i)]];
    }
    out.value = {total / static_cast<double>(r)};
    out.needs_grad = t.node(logits.id()).needs_grad;
    const int lid = logits.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [lid, oid, targets, probs, r, c](Tape& tp) {
            const double g = tp.node(oid).grad[0] / static_cast<double>(r);
            std::vector<double>& gl = tp.grad_buf(lid);
            for (Index i = 0; i < r; ++i)
                for (Index j = 0; j < c; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i * c + j);
                    const double onehot = (j == targets[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
                    gl[k] += g * (probs[k] - onehot);
                }
        };
    }
    return t.handle(t.push(std::move(out)));
}

Tensor cross_entropy_mean_soft(const Tensor& logits, const std::vector<double>& target_dist) {
    Tape& t = logits.tape();
    const Index r = logits.rows(), c = logits.cols();
    if (static_cast<Index>(target_dist.size()) != c)
        throw std::invalid_argument("cross_entropy_mean_soft: distribution has " +
                                    std::to_string(target_dist.size()) + " entries for " +
                                    std::to_string(c) + " classes");
    double wsum = 0.0;
    for (double w : target_dist) {
        if (w < 0.0) throw std::invalid_argument("cross_entropy_mean_soft: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("cross_entropy_mean_soft: weights sum to " +
                                    std::to_string(wsum));

    Tape::Node out;
    out.rows = 1;
    out.cols = 1;
    out.kind = OpKind::cross_entropy_soft;
    const std::vector<double>& lv = logits.data();
    std::vector<double> probs(lv.size());
    double total = 0.0;
    for (Index i = 0; i < r; ++i) {
        const double* row = lv.data() + i * c;
        double m = row[0];
        for (Index j = 1; j < c; ++j) m = std::max(m, row[j]);
        double se = 0.0;
        for (Index j = 0; j < c; ++j) se += std::exp(row[j] - m);
        const double lse = m + std::log(se);
        for (Index j = 0; j < c; ++j) {
            probs[static_cast<std::size_t>(i * c + j)] = std::exp(row[j] - lse);
            total += target_dist[static_cast<std::size_t>(j)] * (lse - row[j]);
        }
    }
    out.value = {total / static_cast<double>(r)};
    out.needs_grad = t.node(logits.id()).needs_grad;
    const int lid = logits.id();
    if (out.needs_grad) {
        const int oid = static_cast<int>(t.num_nodes());
        out.back = [lid, oid, target_dist, probs, r, c](Tape& tp) {
            const double g = tp.node(oid).grad[0] / static_cast<double>(r);
            std::vector<double>& gl = tp.grad_buf(lid);
            for (Index i = 0; i < r; ++i)
                for (Index j = 0; j < c; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i * c + j);
                    gl[k] += g * (probs[k] - target_dist[static_cast<std::size_t>(j)]);
                }
        };
    }
    return t.handle(t.push(std::move(out)));
}

} // namespace arprl
