// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "molproj/autodiff.hpp"
#include "molproj/random.hpp"

namespace molproj {

struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;
};

/// Owns the named leaves of a model. Names are unique; insertion order is the
/// canonical order used by checkpoints, hashes and optimizers.
class ParameterStore {
 public:
  Var add(const std::string& name, Tensor init, bool trainable = true);

  bool contains(std::string_view name) const;
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Sets the trainable flag on every parameter whose name starts with
  /// `prefix`; returns how many matched.
  std::size_t set_trainable(std::string_view prefix, bool trainable);
  void set_all_trainable(bool trainable);

  /// Gives every trainable parameter an explicit zero gradient.
  void zero_grad();

  /// FNV-1a over names, shapes and raw values of parameters whose names start
  /// with `prefix` (all parameters when empty).
  std::uint64_t hash(std::string_view prefix = {}) const;
  std::size_t element_count(bool trainable_only = false) const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Xavier-uniform fan_in x fan_out matrix.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor normal_tensor(Shape shape, double stddev, Rng& rng);

/// Affine map y = x W + b with W stored in x out.
struct Linear {
  Var weight;
  Var bias;  // may be empty

  static Linear create(ParameterStore& store, const std::string& name,
                       std::size_t in, std::size_t out, Rng& rng,
                       bool with_bias = true);
  Var operator()(const Var& x) const;
};

/// Functional affine map; `bias` may be empty.
Var linear(const Var& x, const Var& w, const Var& bias = {});

enum class Activation { identity, gelu };

/// Alternating linear/activation stack with a linear final layer.
class Mlp {
 public:
  Mlp() = default;
  /// `widths` = {in, hidden..., out}; at least two entries.
  static Mlp create(ParameterStore& store, const std::string& name,
                    const std::vector<std::size_t>& widths, Activation act,
                    Rng& rng);
  Var operator()(const Var& x) const;

  const std::vector<Linear>& layers() const { return layers_; }
  std::size_t in_width() const;
  std::size_t out_width() const;

 private:
  std::vector<Linear> layers_;
  Activation act_ = Activation::gelu;
};

/// Projection matrices of one attention module. `wo` is optional; without it
/// the concatenated heads are returned directly.
struct AttentionWeights {
  Var wq, wk, wv, wo;

  static AttentionWeights create(ParameterStore& store, const std::string& name,
                                 std::size_t d_model, Rng& rng,
                                 bool with_output = true);
};

struct AttentionOptions {
  std::size_t heads = 1;
  bool causal = false;
  /// For causal attention: query i sees keys j <= i + causal_offset.
  std::size_t causal_offset = 0;
};

/// softmax((q Wq)(k Wk)^T / sqrt(d_head) + bias) v Wv per head, heads
/// concatenated, then multiplied by Wo when present.
///
/// `bias` is empty, a x t (shared by all heads), or heads x a x t.
Var biased_attention(const Var& q, const Var& k, const Var& v, const Var& bias,
                     const AttentionWeights& w,
                     const AttentionOptions& options);

}  // namespace molproj
