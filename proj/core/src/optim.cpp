// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "molproj/errors.hpp"

namespace molproj {

void Adam::step(ParameterStore& store) {
  for (const auto& p : store.all()) {
    if (p.trainable && !p.var.has_grad()) {
      throw ShapeError("optimizer: trainable parameter '" + p.name +
                       "' has no gradient");
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (auto& p : store.all()) {
    if (!p.trainable) continue;
    Tensor& value = p.var.mutable_value();
    const Tensor& grad = p.var.grad();
    auto [it, fresh] = state_.try_emplace(p.name);
    if (fresh || it->second.m.shape() != value.shape()) {
      it->second.m = Tensor(value.shape());
      it->second.v = Tensor(value.shape());
    }
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      if (config_.weight_decay != 0.0) {
        value[i] -= config_.lr * config_.weight_decay * value[i];
      }
      value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<GradReport> gradcheck(const std::function<Var()>& loss_fn,
                                  std::vector<Parameter> params,
                                  const GradcheckOptions& options) {
  if (options.step <= 0.0) throw ConfigError("gradcheck: step must be > 0");

  for (auto& p : params) p.var.zero_grad();
  Var loss = loss_fn();
  if (loss.value().size() != 1) {
    throw ShapeError("gradcheck: loss must be scalar, got " +
                     shape_string(loss.shape()));
  }
  backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.var.grad());

  Rng rng(options.seed);
  std::vector<GradReport> reports;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    Tensor& value = p.var.mutable_value();
    const Tensor& grad = analytic[pi];
    const std::size_t n = value.size();

    std::vector<std::size_t> elements(n);
    std::iota(elements.begin(), elements.end(), std::size_t{0});
    if (options.max_elements != 0 && n > options.max_elements) {
      // Half the budget goes to the largest gradients, half to a random draw.
      std::vector<std::size_t> by_mag = elements;
      std::stable_sort(by_mag.begin(), by_mag.end(),
                       [&](std::size_t a, std::size_t b) {
                         return std::abs(grad[a]) > std::abs(grad[b]);
                       });
      const std::size_t top = options.max_elements / 2;
      std::vector<std::size_t> chosen(by_mag.begin(), by_mag.begin() + top);
      std::vector<std::size_t> rest(by_mag.begin() + top, by_mag.end());
      for (std::size_t i = 0; chosen.size() < options.max_elements; ++i) {
        const std::size_t j = i + rng.index(rest.size() - i);
        std::swap(rest[i], rest[j]);
        chosen.push_back(rest[i]);
      }
      std::sort(chosen.begin(), chosen.end());
      elements = std::move(chosen);
    }

    GradReport report{p.name};
    for (std::size_t idx : elements) {
      const double original = value[idx];
      const double h = options.step * std::max(1.0, std::abs(original));
      const auto central = [&](double step) {
        value[idx] = original + step;
        const double plus = loss_fn().value()[0];
        value[idx] = original - step;
        const double minus = loss_fn().value()[0];
        value[idx] = original;
        return (plus - minus) / (2.0 * step);
      };
      const double coarse = central(h);
      const double numeric =
          options.extrapolate ? (4.0 * central(0.5 * h) - coarse) / 3.0 : coarse;
      const double err = relative_error(grad[idx], numeric, options.min_denominator);
      if (report.checked == 0 || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_index = idx;
        report.analytic = grad[idx];
        report.numeric = numeric;
      }
      ++report.checked;
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace molproj
