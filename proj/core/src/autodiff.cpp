// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>
#include <utility>

#include "molproj/errors.hpp"

namespace molproj {

namespace {

// C += op(A) * op(B) where op(A) is m x k and op(B) is k x n.
void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t n, std::size_t k, bool trans_a, bool trans_b) {
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = a[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    // B stored n x k
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        c[i * n + j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    // A stored k x m
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double api = a[p * m + i];
        if (api == 0.0) continue;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
      }
    }
  } else {
    throw ShapeError("gemm: double transpose not supported");
  }
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_matrix(const Var& a, const char* what) {
  require_rank(a.value(), 2, what);
}

}  // namespace

void Var::zero_grad() { node_->grad = Tensor(node_->value.shape()); }

void Var::accumulate_grad(const Tensor& g) { accumulate(node_.get(), g); }

Tensor& grad_buffer(Node* node) {
  if (node->grad.shape() != node->value.shape()) {
    node->grad = Tensor(node->value.shape());
  }
  return node->grad;
}

void accumulate(Node* node, const Tensor& g) {
  Tensor& buf = grad_buffer(node);
  if (buf.size() != g.size()) {
    throw ShapeError("gradient of shape " + shape_string(g.shape()) +
                     " for value " + shape_string(node->value.shape()));
  }
  auto dst = buf.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var variable(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(const Node& self)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (auto& p : parents) {
    if (p.requires_grad()) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.shared());
    node->backward = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be a single element, got " +
                     shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  grad_buffer(loss.node()).data()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward) continue;
    if (node->grad.shape() != node->value.shape()) continue;
    node->backward(*node);
    // Interior gradients are consumed; only leaves keep theirs.
    node->grad = Tensor();
  }
}

// -- linear algebra ---------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " +
                     shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  gemm(a.value().data().data(), b.value().data().data(), out.data().data(), m,
       n, k, false, false);
  Node* pa = a.node();
  Node* pb = b.node();
  return make_op(std::move(out), {a, b}, [pa, pb, m, k, n](const Node& self) {
    const double* g = self.grad.data().data();
    if (pa->requires_grad) {
      gemm(g, pb->value.data().data(), grad_buffer(pa).data().data(), m, k, n,
           false, true);
    }
    if (pb->requires_grad) {
      gemm(pa->value.data().data(), g, grad_buffer(pb).data().data(), k, n, m,
           true, false);
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_matrix(a, "matmul_nt lhs");
  require_matrix(b, "matmul_nt rhs");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions differ " +
                     shape_string(a.shape()) + " x " +
                     shape_string(b.shape()) + "^T");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out({m, n});
  gemm(a.value().data().data(), b.value().data().data(), out.data().data(), m,
       n, k, false, true);
  Node* pa = a.node();
  Node* pb = b.node();
  return make_op(std::move(out), {a, b}, [pa, pb, m, k, n](const Node& self) {
    const double* g = self.grad.data().data();
    if (pa->requires_grad) {
      // dA = G B
      gemm(g, pb->value.data().data(), grad_buffer(pa).data().data(), m, k, n,
           false, false);
    }
    if (pb->requires_grad) {
      // dB = G^T A
      gemm(g, pa->value.data().data(), grad_buffer(pb).data().data(), n, k, m,
           true, false);
    }
  });
}

Var transpose(const Var& a) {
  require_matrix(a, "transpose");
  Node* pa = a.node();
  return make_op(molproj::transpose(a.value()), {a}, [pa](const Node& self) {
    accumulate(pa, molproj::transpose(self.grad));
  });
}

// -- elementwise ------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  auto od = out.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  Node* pa = a.node();
  Node* pb = b.node();
  return make_op(std::move(out), {a, b}, [pa, pb](const Node& self) {
    if (pa->requires_grad) accumulate(pa, self.grad);
    if (pb->requires_grad) accumulate(pb, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  auto od = out.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  Node* pa = a.node();
  Node* pb = b.node();
  return make_op(std::move(out), {a, b}, [pa, pb](const Node& self) {
    if (pa->requires_grad) accumulate(pa, self.grad);
    if (pb->requires_grad) {
      auto& buf = grad_buffer(pb);
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  auto od = out.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  Node* pa = a.node();
  Node* pb = b.node();
  return make_op(std::move(out), {a, b}, [pa, pb](const Node& self) {
    if (pa->requires_grad) {
      auto& buf = grad_buffer(pa);
      for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto& buf = grad_buffer(pb);
      for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] += self.grad[i] * pa->value[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  Node* pa = a.node();
  return make_op(std::move(out), {a}, [pa, factor](const Node& self) {
    auto& buf = grad_buffer(pa);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += self.grad[i] * factor;
  });
}

Var scale_by(const Var& x, const Var& s) {
  if (s.value().size() != 1) {
    throw ShapeError("scale_by: factor must be a single element, got " +
                     shape_string(s.shape()));
  }
  const double factor = s.value()[0];
  Tensor out = x.value();
  for (auto& v : out.data()) v *= factor;
  Node* px = x.node();
  Node* ps = s.node();
  return make_op(std::move(out), {x, s}, [px, ps](const Node& self) {
    const double factor = ps->value[0];
    if (px->requires_grad) {
      auto& buf = grad_buffer(px);
      for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] += self.grad[i] * factor;
    }
    if (ps->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        acc += self.grad[i] * px->value[i];
      grad_buffer(ps)[0] += acc;
    }
  });
}

Var add_row_bias(const Var& x, const Var& bias) {
  require_matrix(x, "add_row_bias");
  const std::size_t m = x.rows(), q = x.cols();
  if (bias.value().size() != q) {
    throw ShapeError("add_row_bias: bias " + shape_string(bias.shape()) +
                     " for input " + shape_string(x.shape()));
  }
  Tensor out = x.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < q; ++j) out(i, j) += bias.value()[j];
  Node* px = x.node();
  Node* pb = bias.node();
  return make_op(std::move(out), {x, bias}, [px, pb, m, q](const Node& self) {
    if (px->requires_grad) accumulate(px, self.grad);
    if (pb->requires_grad) {
      auto& buf = grad_buffer(pb);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < q; ++j) buf[j] += self.grad(i, j);
    }
  });
}

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Var gelu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = gelu_value(v);
  Node* px = x.node();
  return make_op(std::move(out), {x}, [px](const Node& self) {
    auto& buf = grad_buffer(px);
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] += self.grad[i] * gelu_derivative(px->value[i]);
  });
}

// -- normalizations ---------------------------------------------------------

namespace {

void softmax_backward_rows(const Node& self, Node* input) {
  const std::size_t r = self.value.rows(), c = self.value.cols();
  auto& buf = grad_buffer(input);
  for (std::size_t i = 0; i < r; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j) dot += self.grad(i, j) * self.value(i, j);
    for (std::size_t j = 0; j < c; ++j)
      buf(i, j) += self.value(i, j) * (self.grad(i, j) - dot);
  }
}

}  // namespace

Var softmax_rows(const Var& logits) {
  Node* px = logits.node();
  return make_op(molproj::softmax_rows(logits.value()), {logits},
                 [px](const Node& self) { softmax_backward_rows(self, px); });
}

Var causal_softmax_rows(const Var& logits, std::size_t offset) {
  require_matrix(logits, "causal_softmax_rows");
  const std::size_t r = logits.rows(), c = logits.cols();
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t visible = std::min(c, i + offset + 1);
    if (visible == 0) continue;
    double mx = logits.value()(i, 0);
    for (std::size_t j = 1; j < visible; ++j)
      mx = std::max(mx, logits.value()(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
      const double e = std::exp(logits.value()(i, j) - mx);
      out(i, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < visible; ++j) out(i, j) /= total;
  }
  Node* px = logits.node();
  return make_op(std::move(out), {logits},
                 [px](const Node& self) { softmax_backward_rows(self, px); });
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias,
                    double eps) {
  require_matrix(x, "layer_norm_rows");
  const std::size_t m = x.rows(), q = x.cols();
  if (gain.value().size() != q || bias.value().size() != q) {
    throw ShapeError("layer_norm_rows: gain/bias width differs from " +
                     shape_string(x.shape()));
  }
  Tensor normalized({m, q});
  std::vector<double> inv_std(m);
  Tensor out({m, q});
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < q; ++j) mu += x.value()(i, j);
    mu /= static_cast<double>(q);
    double var = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      const double d = x.value()(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(q);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < q; ++j) {
      normalized(i, j) = (x.value()(i, j) - mu) * inv_std[i];
      out(i, j) = normalized(i, j) * gain.value()[j] + bias.value()[j];
    }
  }
  Node* px = x.node();
  Node* pg = gain.node();
  Node* pb = bias.node();
  return make_op(
      std::move(out), {x, gain, bias},
      [px, pg, pb, m, q, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](const Node& self) {
        const Tensor& g = self.grad;
        if (pg->requires_grad) {
          auto& buf = grad_buffer(pg);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < q; ++j)
              buf[j] += g(i, j) * normalized(i, j);
        }
        if (pb->requires_grad) {
          auto& buf = grad_buffer(pb);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < q; ++j) buf[j] += g(i, j);
        }
        if (px->requires_grad) {
          auto& buf = grad_buffer(px);
          const double inv_q = 1.0 / static_cast<double>(q);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dn = 0.0;
            for (std::size_t j = 0; j < q; ++j) {
              const double d = g(i, j) * pg->value[j];
              mean_d += d;
              mean_dn += d * normalized(i, j);
            }
            mean_d *= inv_q;
            mean_dn *= inv_q;
            for (std::size_t j = 0; j < q; ++j) {
              const double d = g(i, j) * pg->value[j];
              buf(i, j) +=
                  inv_std[i] * (d - mean_d - normalized(i, j) * mean_dn);
            }
          }
        }
      });
}

// -- structural ---------------------------------------------------------------

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != c) {
      throw ShapeError("concat_rows: column mismatch " + shape_string(p.shape()));
    }
    r += p.rows();
  }
  Tensor out({r, c});
  std::vector<Var> parents(parts.begin(), parts.end());
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.value().size();
  }
  std::vector<Node*> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op(std::move(out), std::move(parents),
                 [nodes = std::move(nodes)](const Node& self) {
                   std::size_t offset = 0;
                   for (Node* n : nodes) {
                     const std::size_t len = n->value.size();
                     if (n->requires_grad) {
                       auto& buf = grad_buffer(n);
                       for (std::size_t i = 0; i < len; ++i)
                         buf[i] += self.grad[offset + i];
                     }
                     offset += len;
                   }
                 });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != r) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(p.shape()));
    }
    c += p.cols();
  }
  Tensor out({r, c});
  std::size_t col0 = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j)
        out(i, col0 + j) = p.value()(i, j);
    col0 += p.cols();
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  std::vector<Node*> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op(std::move(out), std::move(parents),
                 [nodes = std::move(nodes), r](const Node& self) {
                   std::size_t col0 = 0;
                   for (Node* n : nodes) {
                     const std::size_t w = n->value.cols();
                     if (n->requires_grad) {
                       auto& buf = grad_buffer(n);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < w; ++j)
                           buf(i, j) += self.grad(i, col0 + j);
                     }
                     col0 += w;
                   }
                 });
}

Var slice_rows(const Var& x, std::size_t start, std::size_t count) {
  require_matrix(x, "slice_rows");
  if (start + count > x.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " +
                     shape_string(x.shape()));
  }
  const std::size_t c = x.cols();
  Tensor out({count, c});
  const auto src = x.value().data().subspan(start * c, count * c);
  std::copy(src.begin(), src.end(), out.data().begin());
  Node* px = x.node();
  return make_op(std::move(out), {x}, [px, start, c](const Node& self) {
    auto& buf = grad_buffer(px);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      buf[start * c + i] += self.grad[i];
  });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t count) {
  require_matrix(x, "slice_cols");
  if (start + count > x.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " +
                     shape_string(x.shape()));
  }
  const std::size_t r = x.rows();
  Tensor out({r, count});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j)
      out(i, j) = x.value()(i, start + j);
  Node* px = x.node();
  return make_op(std::move(out), {x}, [px, start, r, count](const Node& self) {
    auto& buf = grad_buffer(px);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j)
        buf(i, start + j) += self.grad(i, j);
  });
}

Var reshape(const Var& x, Shape shape) {
  Node* px = x.node();
  return make_op(x.value().reshaped(std::move(shape)), {x},
                 [px](const Node& self) {
                   auto& buf = grad_buffer(px);
                   for (std::size_t i = 0; i < buf.size(); ++i)
                     buf[i] += self.grad[i];
                 });
}

Var take(const Var& src, std::vector<std::size_t> indices, Shape shape) {
  if (shape_size(shape) != indices.size()) {
    throw ShapeError("take: " + std::to_string(indices.size()) +
                     " indices for shape " + shape_string(shape));
  }
  Tensor out(std::move(shape));
  const std::size_t limit = src.value().size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= limit) {
      throw ShapeError("take: index " + std::to_string(indices[i]) +
                       " out of range for " + shape_string(src.shape()));
    }
    out[i] = src.value()[indices[i]];
  }
  Node* ps = src.node();
  return make_op(std::move(out), {src},
                 [ps, indices = std::move(indices)](const Node& self) {
                   auto& buf = grad_buffer(ps);
                   for (std::size_t i = 0; i < indices.size(); ++i)
                     buf[indices[i]] += self.grad[i];
                 });
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  Node* px = x.node();
  return make_op(Tensor::scalar(total), {x}, [px](const Node& self) {
    auto& buf = grad_buffer(px);
    const double g = self.grad[0];
    for (auto& v : buf.data()) v += g;
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  if (x.value().size() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / n);
}

Var cross_entropy(const Var& logits, std::span<const std::size_t> rows,
                  std::span<const std::size_t> targets) {
  require_matrix(logits, "cross_entropy");
  if (rows.size() != targets.size() || rows.empty()) {
    throw ShapeError("cross_entropy: need matching, nonempty rows/targets");
  }
  const std::size_t v = logits.cols();
  const auto& lv = logits.value();
  std::vector<std::size_t> row_idx(rows.begin(), rows.end());
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  Tensor probs({row_idx.size(), v});
  double total = 0.0;
  for (std::size_t t = 0; t < row_idx.size(); ++t) {
    const std::size_t r = row_idx[t];
    if (r >= logits.rows() || tgt[t] >= v) {
      throw ShapeError("cross_entropy: row or target index out of range");
    }
    double mx = lv(r, 0);
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, lv(r, j));
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      const double e = std::exp(lv(r, j) - mx);
      probs(t, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < v; ++j) probs(t, j) /= z;
    total += -(lv(r, tgt[t]) - mx - std::log(z));
  }
  const double inv_n = 1.0 / static_cast<double>(row_idx.size());
  Node* pl = logits.node();
  return make_op(
      Tensor::scalar(total * inv_n), {logits},
      [pl, v, inv_n, row_idx = std::move(row_idx), tgt = std::move(tgt),
       probs = std::move(probs)](const Node& self) {
        auto& buf = grad_buffer(pl);
        const double g = self.grad[0] * inv_n;
        for (std::size_t t = 0; t < row_idx.size(); ++t) {
          const std::size_t r = row_idx[t];
          for (std::size_t j = 0; j < v; ++j) buf(r, j) += g * probs(t, j);
          buf(r, tgt[t]) -= g;
        }
      });
}

}  // namespace molproj
