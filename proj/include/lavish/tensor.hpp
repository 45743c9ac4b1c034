// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle to a shared node. Operations on tensors that
// require gradients record a backward closure on the result; backward() on a
// scalar walks the recorded graph in reverse topological order and
// accumulates into every reachable leaf with requires_grad set. Leaf
// gradients stay pending until zero_grad() is called, and a second backward
// through a pending leaf is rejected.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lavish {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    // Row-major matrix from nested rows; all rows must have equal length.
    static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    // Matrix views; require rank 2.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const;
    // Only leaves may be mutated in place (parameters, inputs).
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t i) const { return data()[i]; }
    double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    // Deep copy of the values as a fresh leaf.
    Tensor clone(bool requires_grad = false) const;
    // Same values, no history, no gradient.
    Tensor detach() const { return clone(false); }

    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool leaf = true;
    bool grad_pending = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backprop;

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

// While alive, operations on this thread record no history (evaluation).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};
bool grad_mode_enabled();

// Runs reverse-mode differentiation from a single-element loss.
// Throws std::invalid_argument for a non-scalar or non-differentiable loss and
// std::logic_error when a reachable leaf still holds a gradient from a
// previous backward pass.
void backward(const Tensor& loss);

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// a * g for a single-element tensor g (gates).
Tensor mul_scalar(const Tensor& a, const Tensor& g);
// a[p x q] + bias broadcast over rows; bias has q elements.
Tensor add_row_bias(const Tensor& a, const Tensor& bias);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Column means: [p x q] -> [1 x q].
Tensor mean_rows(const Tensor& a);
Tensor softmax_rows(const Tensor& x);

// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
inline constexpr double kGeluTanhCoeff = 0.044715;
inline constexpr double kGeluSqrt2OverPi = 0.7978845608028654;
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);

inline constexpr double kLayerNormEps = 1e-5;
// Normalizes each row, then applies per-column gamma and beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = kLayerNormEps);

// Block-diagonal linear map. weight has shape {G, in/G, out/G}; input column
// block g is multiplied by weight[g] into output column block g.
Tensor grouped_linear(const Tensor& x, const Tensor& weight);

// Mean softmax cross-entropy over rows of logits [B x C].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace lavish
