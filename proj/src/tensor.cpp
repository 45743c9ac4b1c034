// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "lavish/kernels.hpp"
#include "lavish/op_counter.hpp"

namespace lavish {

using detail::Node;

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

namespace {
thread_local bool t_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_mode_enabled() { return t_grad_enabled; }

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor shape " + shape_to_string(shape) + " has a zero dimension");
    }
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    check_shape(shape);
    if (shape_numel(shape) != values.size()) {
        throw std::invalid_argument("tensor shape " + shape_to_string(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return n;
}

// Creates a result node; history is recorded only when some input needs it.
std::shared_ptr<Node> make_result(Shape shape, std::vector<double> values,
                                  std::initializer_list<const Tensor*> inputs) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->leaf = false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad() && t_grad_enabled) n->requires_grad = true;
    }
    if (n->requires_grad) {
        for (const Tensor* t : inputs) n->inputs.push_back(t->node_ptr());
    }
    return n;
}

std::shared_ptr<Node> make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->leaf = false;
    for (const Tensor& t : inputs) {
        if (t.requires_grad() && t_grad_enabled) n->requires_grad = true;
    }
    if (n->requires_grad) {
        for (const Tensor& t : inputs) n->inputs.push_back(t.node_ptr());
    }
    return n;
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

void require_matrix(const Tensor& t, const char* op) {
    require_defined(t, op);
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(op) + ": expected a matrix, got shape " + shape_to_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require_defined(a, op);
    require_defined(b, op);
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                    shape_to_string(b.shape()));
    }
}

bool wants(const std::shared_ptr<Node>& n) { return n->requires_grad; }

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows, bool requires_grad) {
    if (rows.empty() || rows.front().empty()) throw std::invalid_argument("matrix: empty rows");
    const std::size_t c = rows.front().size();
    std::vector<double> v;
    v.reserve(rows.size() * c);
    for (const auto& r : rows) {
        if (r.size() != c) throw std::invalid_argument("matrix: ragged rows");
        v.insert(v.end(), r.begin(), r.end());
    }
    return from({rows.size(), c}, std::move(v), requires_grad);
}

const Shape& Tensor::shape() const {
    require_defined(*this, "shape");
    return node_->shape;
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::size_t Tensor::rows() const {
    require_matrix(*this, "rows");
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    require_matrix(*this, "cols");
    return node_->shape[1];
}

std::span<const double> Tensor::data() const {
    require_defined(*this, "data");
    return node_->value;
}

std::span<double> Tensor::mutable_data() {
    require_defined(*this, "mutable_data");
    if (!node_->leaf) throw std::logic_error("mutable_data: only leaf tensors may be modified in place");
    return node_->value;
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor " + shape_to_string(shape()) + " is not a scalar");
    return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    require_defined(*this, "set_requires_grad");
    if (!node_->leaf) throw std::logic_error("set_requires_grad: only leaves carry the flag");
    node_->requires_grad = on;
}

bool Tensor::is_leaf() const { return node_ && node_->leaf; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    require_defined(*this, "grad");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_) return;
    node_->grad.clear();
    node_->grad_pending = false;
}

Tensor Tensor::clone(bool requires_grad) const {
    require_defined(*this, "clone");
    return Tensor(make_leaf(node_->shape, node_->value, requires_grad));
}

// ---- backward -------------------------------------------------------------

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.numel() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_to_string(loss.shape()));
    }
    if (!loss.requires_grad()) throw std::invalid_argument("backward: loss does not depend on any trainable tensor");

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (n->leaf && n->grad_pending) {
            throw std::logic_error("backward: a leaf still holds a gradient from a previous pass; call zero_grad first");
        }
    }

    loss.node()->grad_buffer()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->leaf && n->backprop && !n->grad.empty()) n->backprop(*n);
    }
    for (Node* n : order) {
        if (n->leaf) {
            n->grad_buffer();
            n->grad_pending = true;
        } else {
            n->grad.clear();
        }
    }
}

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
    if (b.rows() != q) {
        throw std::invalid_argument("matmul: inner dimensions disagree for " + shape_to_string(a.shape()) + " and " +
                                    shape_to_string(b.shape()));
    }
    std::vector<double> out(p * r, 0.0);
    kernels::gemm_nn(a.data().data(), b.data().data(), out.data(), p, q, r);
    record_ops({p * q * r, 0, 0});
    auto n = make_result({p, r}, std::move(out), {&a, &b});
    if (n->requires_grad) {
        n->backprop = [p, q, r](Node& self) {
            Node& na = *self.inputs[0];
            Node& nb = *self.inputs[1];
            if (na.requires_grad) kernels::gemm_nt(self.grad.data(), nb.value.data(), na.grad_buffer().data(), p, r, q);
            if (nb.requires_grad) kernels::gemm_tn(na.value.data(), self.grad.data(), nb.grad_buffer().data(), p, q, r);
        };
    }
    return Tensor(n);
}

Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    const std::size_t p = a.rows(), q = a.cols();
    std::vector<double> out(p * q);
    const auto in = a.data();
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) out[j * p + i] = in[i * q + j];
    auto n = make_result({q, p}, std::move(out), {&a});
    if (n->requires_grad) {
        n->backprop = [p, q](Node& self) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < q; ++j) g[i * q + j] += self.grad[j * p + i];
        };
    }
    return Tensor(n);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    kernels::table().add(a.data().data(), b.data().data(), out.data(), out.size());
    auto n = make_result(a.shape(), std::move(out), {&a, &b});
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            const auto axpy = kernels::table().axpy;
            for (auto& in : self.inputs) {
                if (wants(in)) axpy(1.0, self.grad.data(), in->grad_buffer().data(), self.grad.size());
            }
        };
    }
    return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
    auto n = make_result(a.shape(), std::move(out), {&a, &b});
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            const auto axpy = kernels::table().axpy;
            if (wants(self.inputs[0])) axpy(1.0, self.grad.data(), self.inputs[0]->grad_buffer().data(), self.grad.size());
            if (wants(self.inputs[1])) axpy(-1.0, self.grad.data(), self.inputs[1]->grad_buffer().data(), self.grad.size());
        };
    }
    return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
    auto n = make_result(a.shape(), std::move(out), {&a, &b});
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& na = *self.inputs[0];
            Node& nb = *self.inputs[1];
            if (na.requires_grad) {
                auto& g = na.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb.value[i];
            }
            if (nb.requires_grad) {
                auto& g = nb.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na.value[i];
            }
        };
    }
    return Tensor(n);
}

Tensor scale(const Tensor& a, double factor) {
    require_defined(a, "scale");
    std::vector<double> out(a.data().begin(), a.data().end());
    for (double& v : out) v *= factor;
    auto n = make_result(a.shape(), std::move(out), {&a});
    if (n->requires_grad) {
        n->backprop = [factor](Node& self) {
            kernels::table().axpy(factor, self.grad.data(), self.inputs[0]->grad_buffer().data(), self.grad.size());
        };
    }
    return Tensor(n);
}

Tensor mul_scalar(const Tensor& a, const Tensor& g) {
    require_defined(a, "mul_scalar");
    require_defined(g, "mul_scalar");
    if (g.numel() != 1) throw std::invalid_argument("mul_scalar: gate must have one element, got " + shape_to_string(g.shape()));
    const double gv = g.item();
    std::vector<double> out(a.data().begin(), a.data().end());
    for (double& v : out) v *= gv;
    auto n = make_result(a.shape(), std::move(out), {&a, &g});
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& na = *self.inputs[0];
            Node& ng = *self.inputs[1];
            if (na.requires_grad) kernels::table().axpy(ng.value[0], self.grad.data(), na.grad_buffer().data(), self.grad.size());
            if (ng.requires_grad) ng.grad_buffer()[0] += kernels::table().dot(self.grad.data(), na.value.data(), self.grad.size());
        };
    }
    return Tensor(n);
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
    require_matrix(a, "add_row_bias");
    require_defined(bias, "add_row_bias");
    const std::size_t p = a.rows(), q = a.cols();
    if (bias.numel() != q) {
        throw std::invalid_argument("add_row_bias: bias " + shape_to_string(bias.shape()) + " does not match columns of " +
                                    shape_to_string(a.shape()));
    }
    std::vector<double> out(p * q);
    for (std::size_t i = 0; i < p; ++i) kernels::table().add(a.data().data() + i * q, bias.data().data(), out.data() + i * q, q);
    auto n = make_result({p, q}, std::move(out), {&a, &bias});
    if (n->requires_grad) {
        n->backprop = [p, q](Node& self) {
            const auto axpy = kernels::table().axpy;
            if (wants(self.inputs[0])) axpy(1.0, self.grad.data(), self.inputs[0]->grad_buffer().data(), p * q);
            if (wants(self.inputs[1])) {
                auto& g = self.inputs[1]->grad_buffer();
                for (std::size_t i = 0; i < p; ++i) axpy(1.0, self.grad.data() + i * q, g.data(), q);
            }
        };
    }
    return Tensor(n);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    std::size_t total = 0;
    const std::size_t q = parts.front().cols();
    for (const Tensor& t : parts) {
        if (t.cols() != q) {
            throw std::invalid_argument("concat_rows: column mismatch " + shape_to_string(parts.front().shape()) + " vs " +
                                        shape_to_string(t.shape()));
        }
        total += t.rows();
    }
    std::vector<double> out;
    out.reserve(total * q);
    for (const Tensor& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
    auto n = make_result({total, q}, std::move(out), parts);
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            std::size_t offset = 0;
            for (auto& in : self.inputs) {
                const std::size_t len = in->value.size();
                if (wants(in)) kernels::table().axpy(1.0, self.grad.data() + offset, in->grad_buffer().data(), len);
                offset += len;
            }
        };
    }
    return Tensor(n);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t p = parts.front().rows();
    std::size_t total = 0;
    for (const Tensor& t : parts) {
        if (t.rows() != p) {
            throw std::invalid_argument("concat_cols: row mismatch " + shape_to_string(parts.front().shape()) + " vs " +
                                        shape_to_string(t.shape()));
        }
        total += t.cols();
    }
    std::vector<double> out(p * total);
    std::size_t col = 0;
    for (const Tensor& t : parts) {
        const std::size_t c = t.cols();
        for (std::size_t i = 0; i < p; ++i) std::copy_n(t.data().data() + i * c, c, out.data() + i * total + col);
        col += c;
    }
    auto n = make_result({p, total}, std::move(out), parts);
    if (n->requires_grad) {
        n->backprop = [p, total](Node& self) {
            std::size_t col = 0;
            for (auto& in : self.inputs) {
                const std::size_t c = in->shape[1];
                if (wants(in)) {
                    auto& g = in->grad_buffer();
                    for (std::size_t i = 0; i < p; ++i) kernels::table().axpy(1.0, self.grad.data() + i * total + col, g.data() + i * c, c);
                }
                col += c;
            }
        };
    }
    return Tensor(n);
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
    require_matrix(a, "slice_cols");
    const std::size_t p = a.rows(), q = a.cols();
    if (count == 0 || begin + count > q) throw std::invalid_argument("slice_cols: range out of bounds for " + shape_to_string(a.shape()));
    std::vector<double> out(p * count);
    for (std::size_t i = 0; i < p; ++i) std::copy_n(a.data().data() + i * q + begin, count, out.data() + i * count);
    auto n = make_result({p, count}, std::move(out), {&a});
    if (n->requires_grad) {
        n->backprop = [p, q, begin, count](Node& self) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < p; ++i) kernels::table().axpy(1.0, self.grad.data() + i * count, g.data() + i * q + begin, count);
        };
    }
    return Tensor(n);
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
    require_matrix(a, "slice_rows");
    const std::size_t p = a.rows(), q = a.cols();
    if (count == 0 || begin + count > p) throw std::invalid_argument("slice_rows: range out of bounds for " + shape_to_string(a.shape()));
    std::vector<double> out(a.data().begin() + begin * q, a.data().begin() + (begin + count) * q);
    auto n = make_result({count, q}, std::move(out), {&a});
    if (n->requires_grad) {
        n->backprop = [q, begin](Node& self) {
            auto& g = self.inputs[0]->grad_buffer();
            kernels::table().axpy(1.0, self.grad.data(), g.data() + begin * q, self.grad.size());
        };
    }
    return Tensor(n);
}

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    double s = 0.0;
    for (double v : a.data()) s += v;
    auto n = make_result({1}, {s}, {&a});
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            const double g0 = self.grad[0];
            for (double& g : self.inputs[0]->grad_buffer()) g += g0;
        };
    }
    return Tensor(n);
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mean_rows(const Tensor& a) {
    require_matrix(a, "mean_rows");
    const std::size_t p = a.rows(), q = a.cols();
    std::vector<double> out(q, 0.0);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) out[j] += a.data()[i * q + j];
    const double inv = 1.0 / static_cast<double>(p);
    for (double& v : out) v *= inv;
    auto n = make_result({1, q}, std::move(out), {&a});
    if (n->requires_grad) {
        n->backprop = [p, q, inv](Node& self) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < p; ++i) kernels::table().axpy(inv, self.grad.data(), g.data() + i * q, q);
        };
    }
    return Tensor(n);
}

Tensor softmax_rows(const Tensor& x) {
    require_matrix(x, "softmax_rows");
    const std::size_t p = x.rows(), q = x.cols();
    const auto in = x.data();
    for (double v : in) {
        if (!std::isfinite(v)) throw std::domain_error("softmax_rows: non-finite input");
    }
    std::vector<double> out(p * q);
    for (std::size_t i = 0; i < p; ++i) {
        const double* row = in.data() + i * q;
        double* o = out.data() + i * q;
        const double mx = *std::max_element(row, row + q);
        double z = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
            o[j] = std::exp(row[j] - mx);
            z += o[j];
        }
        for (std::size_t j = 0; j < q; ++j) o[j] /= z;
    }
    record_ops({0, p * q, p * q});
    auto n = make_result({p, q}, std::move(out), {&x});
    if (n->requires_grad) {
        n->backprop = [p, q](Node& self) {
            auto& g = self.inputs[0]->grad_buffer();
            const auto dot = kernels::table().dot;
            for (std::size_t i = 0; i < p; ++i) {
                const double* y = self.value.data() + i * q;
                const double* gy = self.grad.data() + i * q;
                const double s = dot(y, gy, q);
                for (std::size_t j = 0; j < q; ++j) g[i * q + j] += y[j] * (gy[j] - s);
            }
        };
    }
    return Tensor(n);
}

Tensor gelu(const Tensor& x) {
    require_defined(x, "gelu");
    const auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double v = in[i];
        out[i] = 0.5 * v * (1.0 + std::tanh(kGeluSqrt2OverPi * (v + kGeluTanhCoeff * v * v * v)));
    }
    auto n = make_result(x.shape(), std::move(out), {&x});
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& nx = *self.inputs[0];
            auto& g = nx.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = nx.value[i];
                const double t = std::tanh(kGeluSqrt2OverPi * (v + kGeluTanhCoeff * v * v * v));
                const double dt = (1.0 - t * t) * kGeluSqrt2OverPi * (1.0 + 3.0 * kGeluTanhCoeff * v * v);
                g[i] += self.grad[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
            }
        };
    }
    return Tensor(n);
}

Tensor relu(const Tensor& x) {
    require_defined(x, "relu");
    std::vector<double> out(x.data().begin(), x.data().end());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    auto n = make_result(x.shape(), std::move(out), {&x});
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& nx = *self.inputs[0];
            auto& g = nx.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (nx.value[i] > 0.0) g[i] += self.grad[i];
            }
        };
    }
    return Tensor(n);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_matrix(x, "layer_norm");
    const std::size_t p = x.rows(), q = x.cols();
    if (gamma.numel() != q || beta.numel() != q) {
        throw std::invalid_argument("layer_norm: scale/shift size does not match width of " + shape_to_string(x.shape()));
    }
    const auto in = x.data();
    const auto gm = gamma.data();
    const auto bt = beta.data();
    std::vector<double> out(p * q);
    // xhat and inverse std are kept for the backward pass.
    auto xhat = std::make_shared<std::vector<double>>(p * q);
    auto inv_std = std::make_shared<std::vector<double>>(p);
    for (std::size_t i = 0; i < p; ++i) {
        const double* row = in.data() + i * q;
        double mu = 0.0;
        for (std::size_t j = 0; j < q; ++j) mu += row[j];
        mu /= static_cast<double>(q);
        double var = 0.0;
        for (std::size_t j = 0; j < q; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(q);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < q; ++j) {
            const double h = (row[j] - mu) * is;
            (*xhat)[i * q + j] = h;
            out[i * q + j] = h * gm[j] + bt[j];
        }
    }
    auto n = make_result({p, q}, std::move(out), {&x, &gamma, &beta});
    if (n->requires_grad) {
        n->backprop = [p, q, xhat, inv_std](Node& self) {
            Node& nx = *self.inputs[0];
            Node& ng = *self.inputs[1];
            Node& nb = *self.inputs[2];
            if (ng.requires_grad || nb.requires_grad) {
                for (std::size_t i = 0; i < p; ++i) {
                    for (std::size_t j = 0; j < q; ++j) {
                        const double gy = self.grad[i * q + j];
                        if (ng.requires_grad) ng.grad_buffer()[j] += gy * (*xhat)[i * q + j];
                        if (nb.requires_grad) nb.grad_buffer()[j] += gy;
                    }
                }
            }
            if (nx.requires_grad) {
                auto& gx = nx.grad_buffer();
                const double inv_q = 1.0 / static_cast<double>(q);
                for (std::size_t i = 0; i < p; ++i) {
                    double mean_g = 0.0, mean_gh = 0.0;
                    for (std::size_t j = 0; j < q; ++j) {
                        const double gh = self.grad[i * q + j] * ng.value[j];
                        mean_g += gh;
                        mean_gh += gh * (*xhat)[i * q + j];
                    }
                    mean_g *= inv_q;
                    mean_gh *= inv_q;
                    for (std::size_t j = 0; j < q; ++j) {
                        const double gh = self.grad[i * q + j] * ng.value[j];
                        gx[i * q + j] += (*inv_std)[i] * (gh - mean_g - (*xhat)[i * q + j] * mean_gh);
                    }
                }
            }
        };
    }
    return Tensor(n);
}

Tensor grouped_linear(const Tensor& x, const Tensor& weight) {
    require_matrix(x, "grouped_linear");
    require_defined(weight, "grouped_linear");
    if (weight.rank() != 3) {
        throw std::invalid_argument("grouped_linear: weight must be {groups, in/groups, out/groups}, got " +
                                    shape_to_string(weight.shape()));
    }
    const std::size_t groups = weight.shape()[0], in_g = weight.shape()[1], out_g = weight.shape()[2];
    const std::size_t p = x.rows(), in = x.cols(), out_w = groups * out_g;
    if (in != groups * in_g) {
        throw std::invalid_argument("grouped_linear: input " + shape_to_string(x.shape()) + " does not match weight " +
                                    shape_to_string(weight.shape()));
    }
    std::vector<double> out(p * out_w, 0.0);
    const auto axpy = kernels::table().axpy;
    const double* xv = x.data().data();
    const double* wv = weight.data().data();
    for (std::size_t g = 0; g < groups; ++g) {
        const double* wg = wv + g * in_g * out_g;
        for (std::size_t i = 0; i < p; ++i) {
            double* orow = out.data() + i * out_w + g * out_g;
            for (std::size_t k = 0; k < in_g; ++k) {
                const double xik = xv[i * in + g * in_g + k];
                if (xik != 0.0) axpy(xik, wg + k * out_g, orow, out_g);
            }
        }
    }
    record_ops({p * in_g * out_g * groups, 0, 0});
    auto n = make_result({p, out_w}, std::move(out), {&x, &weight});
    if (n->requires_grad) {
        n->backprop = [groups, in_g, out_g, p, in, out_w](Node& self) {
            Node& nx = *self.inputs[0];
            Node& nw = *self.inputs[1];
            const auto& tbl = kernels::table();
            for (std::size_t g = 0; g < groups; ++g) {
                const double* wg = nw.value.data() + g * in_g * out_g;
                for (std::size_t i = 0; i < p; ++i) {
                    const double* gy = self.grad.data() + i * out_w + g * out_g;
                    if (nx.requires_grad) {
                        double* gx = nx.grad_buffer().data() + i * in + g * in_g;
                        for (std::size_t k = 0; k < in_g; ++k) gx[k] += tbl.dot(wg + k * out_g, gy, out_g);
                    }
                    if (nw.requires_grad) {
                        double* gw = nw.grad_buffer().data() + g * in_g * out_g;
                        const double* xr = nx.value.data() + i * in + g * in_g;
                        for (std::size_t k = 0; k < in_g; ++k) {
                            if (xr[k] != 0.0) tbl.axpy(xr[k], gy, gw + k * out_g, out_g);
                        }
                    }
                }
            }
        };
    }
    return Tensor(n);
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
    require_matrix(logits, "cross_entropy");
    const std::size_t b = logits.rows(), c = logits.cols();
    if (labels.size() != b) throw std::invalid_argument("cross_entropy: label count does not match logits rows");
    auto probs = std::make_shared<std::vector<double>>(b * c);
    std::vector<int> lab(labels.begin(), labels.end());
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        if (lab[i] < 0 || static_cast<std::size_t>(lab[i]) >= c) throw std::invalid_argument("cross_entropy: label out of range");
        const double* row = logits.data().data() + i * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            (*probs)[i * c + j] = std::exp(row[j] - mx);
            z += (*probs)[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] /= z;
        total += (std::log(z) + mx) - row[lab[i]];
    }
    auto n = make_result({1}, {total / static_cast<double>(b)}, {&logits});
    if (n->requires_grad) {
        n->backprop = [b, c, probs, lab = std::move(lab)](Node& self) {
            auto& g = self.inputs[0]->grad_buffer();
            const double s = self.grad[0] / static_cast<double>(b);
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    const double t = (static_cast<int>(j) == lab[i]) ? 1.0 : 0.0;
                    g[i * c + j] += s * ((*probs)[i * c + j] - t);
                }
            }
        };
    }
    return Tensor(n);
}

}  // namespace lavish
