// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "molproj/nn.hpp"

namespace molproj {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled (AdamW) decay, applied as p -= lr * weight_decay * p.
  double weight_decay = 0.0;
};

/// Adam with bias correction. Moments are keyed by parameter name so the
/// same optimizer can follow a store whose trainable set changes.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  /// Updates every trainable parameter from its gradient. Frozen parameters
  /// are skipped entirely. Throws ShapeError when a trainable parameter has
  /// no gradient (call ParameterStore::zero_grad() before backward()).
  void step(ParameterStore& store);

  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::size_t steps_taken() const { return step_; }

 private:
  struct Moments {
    Tensor m, v;
  };
  AdamConfig config_;
  std::size_t step_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

struct GradReport {
  std::string parameter;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;   // at worst_index
  std::size_t checked = 0;
};

struct GradcheckOptions {
  /// Finite-difference step; scaled per element by max(1, |theta|).
  double step = 1e-4;
  /// Checks at most this many elements per parameter (0 = all). Sampled
  /// elements always include the largest-|gradient| entries.
  std::size_t max_elements = 0;
  std::uint64_t seed = 0;
  /// Combines central differences at h and h/2 as (4 D(h/2) - D(h)) / 3,
  /// cancelling the O(h^2) truncation term.
  bool extrapolate = false;
  /// Denominator floor of the relative error. Gradients below it are compared
  /// with absolute tolerance floor * tolerance instead.
  double min_denominator = 1e-8;
};

/// |a - f| / max(|a|, |f|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-8);

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// D(h) = (f(p+h) - f(p-h)) / 2h for each listed parameter. `loss_fn` must rebuild
/// its graph from current parameter values on every call.
std::vector<GradReport> gradcheck(const std::function<Var()>& loss_fn,
                                  std::vector<Parameter> params,
                                  const GradcheckOptions& options = {});

}  // namespace molproj
