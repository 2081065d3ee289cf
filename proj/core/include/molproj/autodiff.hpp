// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode differentiation over a recorded graph of tensor operations.
//
// Every operation returns a Var whose node remembers its parents and a
// closure that pushes the output gradient back into them. backward() walks
// the recorded nodes in reverse topological order. Leaves created with
// variable() accumulate gradients until zero_grad(); intermediate nodes are
// released together with the last Var referencing them.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "molproj/tensor.hpp"

namespace molproj {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Receives this node (value and accumulated grad) and pushes the gradient
  // into whichever parents require it.
  std::function<void(const Node& self)> backward;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  /// Direct access for optimizers and finite differences; leaves only.
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const {
    return node_ && node_->grad.shape() == node_->value.shape();
  }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }

  /// Resets the gradient to an explicit zero tensor of the value's shape.
  void zero_grad();
  void accumulate_grad(const Tensor& g);

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

/// Leaf without gradient tracking.
Var constant(Tensor value);
/// Leaf that accumulates gradients.
Var variable(Tensor value);

/// Builds a node for a custom operation. `backward` receives the finished
/// output node and must accumulate into whichever parents require gradients.
/// If no parent requires gradients the closure is dropped.
Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(const Node& self)> backward);

/// Adds `g` into the gradient buffer of `node`, allocating it on first use.
void accumulate(Node* node, const Tensor& g);
/// Gradient buffer of `node`, zero-initialized on first use.
Tensor& grad_buffer(Node* node);

/// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
/// Throws ShapeError if loss is not a single element.
void backward(const Var& loss);

// -- operations ------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
/// a * b^T without materializing the transpose.
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
/// x * s for a single-element s.
Var scale_by(const Var& x, const Var& s);
/// x[m x q] + b broadcast over rows; b has q elements.
Var add_row_bias(const Var& x, const Var& bias);
Var gelu(const Var& x);
Var softmax_rows(const Var& logits);
/// Softmax where row i only sees columns j <= i + offset; masked entries are
/// exactly zero.
Var causal_softmax_rows(const Var& logits, std::size_t offset = 0);
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias,
                    double eps = 1e-5);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(const Var& x, std::size_t start, std::size_t count);
Var slice_cols(const Var& x, std::size_t start, std::size_t count);
Var reshape(const Var& x, Shape shape);
/// out[i] = src[indices[i]] (flat indexing), reshaped to `shape`.
Var take(const Var& src, std::vector<std::size_t> indices, Shape shape);
Var sum(const Var& x);
Var mean(const Var& x);
/// Mean negative log-likelihood of targets[i] under softmax(logits row rows[i]).
Var cross_entropy(const Var& logits, std::span<const std::size_t> rows,
                  std::span<const std::size_t> targets);

/// Scalar GELU (tanh-free, erf form) and its derivative.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace molproj
