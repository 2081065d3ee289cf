// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/nn.hpp"

#include <cmath>
#include <cstring>

#include "molproj/errors.hpp"

namespace molproj {

Var ParameterStore::add(const std::string& name, Tensor init, bool trainable) {
  if (index_.contains(name)) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  index_.emplace(name, params_.size());
  params_.push_back({name, variable(std::move(init)), trainable});
  return params_.back().var;
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

Parameter& ParameterStore::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw ConfigError("unknown parameter: " + std::string(name));
  }
  return params_[it->second];
}

const Parameter& ParameterStore::get(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->get(name);
}

std::size_t ParameterStore::set_trainable(std::string_view prefix,
                                          bool trainable) {
  std::size_t n = 0;
  for (auto& p : params_) {
    if (p.name.starts_with(prefix)) {
      p.trainable = trainable;
      ++n;
    }
  }
  return n;
}

void ParameterStore::set_all_trainable(bool trainable) {
  for (auto& p : params_) p.trainable = trainable;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    if (p.trainable) {
      p.var.zero_grad();
    } else {
      p.var.node()->grad = Tensor();
    }
  }
}

std::uint64_t ParameterStore::hash(std::string_view prefix) const {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : params_) {
    if (!p.name.starts_with(prefix)) continue;
    h = fnv1a(p.name, h);
    for (std::size_t d : p.var.shape()) {
      const std::uint64_t d64 = d;
      h = fnv1a(&d64, sizeof d64, h);
    }
    const auto data = p.var.value().data();
    h = fnv1a(data.data(), data.size_bytes(), h);
  }
  return h;
}

std::size_t ParameterStore::element_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (!trainable_only || p.trainable) n += p.var.value().size();
  return n;
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (auto& v : t.data()) v = rng.uniform(-a, a);
  return t;
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

Linear Linear::create(ParameterStore& store, const std::string& name,
                      std::size_t in, std::size_t out, Rng& rng,
                      bool with_bias) {
  Linear l;
  l.weight = store.add(name + ".weight", xavier_uniform(in, out, rng));
  if (with_bias) l.bias = store.add(name + ".bias", Tensor({out}));
  return l;
}

Var Linear::operator()(const Var& x) const { return linear(x, weight, bias); }

Var linear(const Var& x, const Var& w, const Var& bias) {
  Var y = matmul(x, w);
  return bias ? add_row_bias(y, bias) : y;
}

Mlp Mlp::create(ParameterStore& store, const std::string& name,
                const std::vector<std::size_t>& widths, Activation act,
                Rng& rng) {
  if (widths.size() < 2) {
    throw ConfigError("mlp '" + name + "' needs at least input and output widths");
  }
  Mlp mlp;
  mlp.act_ = act;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] == 0 || widths[i + 1] == 0) {
      throw ConfigError("mlp '" + name + "' has a zero width");
    }
    mlp.layers_.push_back(Linear::create(store, name + ".fc" + std::to_string(i),
                                         widths[i], widths[i + 1], rng));
  }
  return mlp;
}

Var Mlp::operator()(const Var& x) const {
  if (layers_.empty()) throw ConfigError("mlp has no layers");
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size() && act_ == Activation::gelu) h = gelu(h);
  }
  return h;
}

std::size_t Mlp::in_width() const { return layers_.front().weight.rows(); }
std::size_t Mlp::out_width() const { return layers_.back().weight.cols(); }

AttentionWeights AttentionWeights::create(ParameterStore& store,
                                          const std::string& name,
                                          std::size_t d_model, Rng& rng,
                                          bool with_output) {
  AttentionWeights w;
  w.wq = store.add(name + ".wq", xavier_uniform(d_model, d_model, rng));
  w.wk = store.add(name + ".wk", xavier_uniform(d_model, d_model, rng));
  w.wv = store.add(name + ".wv", xavier_uniform(d_model, d_model, rng));
  if (with_output) {
    w.wo = store.add(name + ".wo", xavier_uniform(d_model, d_model, rng));
  }
  return w;
}

Var biased_attention(const Var& q, const Var& k, const Var& v, const Var& bias,
                     const AttentionWeights& w,
                     const AttentionOptions& options) {
  const std::size_t heads = options.heads;
  if (heads == 0) throw ShapeError("attention: heads must be positive");
  Var qp = matmul(q, w.wq);
  Var kp = matmul(k, w.wk);
  Var vp = matmul(v, w.wv);
  if (qp.cols() != kp.cols() || kp.rows() != vp.rows()) {
    throw ShapeError("attention: projected q/k/v shapes disagree");
  }
  const std::size_t d = qp.cols();
  if (d % heads != 0) {
    throw ShapeError("attention: width " + std::to_string(d) +
                     " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t a = qp.rows(), t = kp.rows(), dh = d / heads;
  if (bias) {
    const Shape& bs = bias.shape();
    const bool shared = bs == Shape{a, t};
    const bool per_head = bs == Shape{heads, a, t};
    if (!shared && !per_head) {
      throw ShapeError("attention: bias " + shape_string(bs) + " for " +
                       std::to_string(heads) + " heads, " + std::to_string(a) +
                       " queries, " + std::to_string(t) + " keys");
    }
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? qp : slice_cols(qp, h * dh, dh);
    Var kh = heads == 1 ? kp : slice_cols(kp, h * dh, dh);
    Var vh = heads == 1 ? vp : slice_cols(vp, h * dh, dh);
    Var logits = scale(matmul_nt(qh, kh), inv_sqrt);
    if (bias) {
      if (bias.value().rank() == 2) {
        logits = add(logits, bias);
      } else {
        std::vector<std::size_t> idx(a * t);
        for (std::size_t i = 0; i < a * t; ++i) idx[i] = h * a * t + i;
        logits = add(logits, take(bias, std::move(idx), {a, t}));
      }
    }
    Var weights = options.causal
                      ? causal_softmax_rows(logits, options.causal_offset)
                      : softmax_rows(logits);
    outs.push_back(matmul(weights, vh));
  }
  Var merged = heads == 1 ? outs.front() : concat_cols(outs);
  return w.wo ? matmul(merged, w.wo) : merged;
}

}  // namespace molproj
