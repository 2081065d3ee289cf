// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/coproj.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <spdlog/spdlog.h>

#include "molproj/errors.hpp"

namespace molproj {

// ---------------------------------------------------------------------------
// ModalityMask

ModalityMask::ModalityMask() = default;

ModalityMask::ModalityMask(std::initializer_list<Modality> active) : bits_(0) {
  for (Modality m : active) bits_ |= bit(m);
  if (bits_ == 0) throw ConfigError("modality mask must not be empty");
}

ModalityMask ModalityMask::from_bits(unsigned bits) {
  if (bits == 0 || bits > 7) {
    throw ConfigError("modality mask bits must be in 1..7, got " +
                      std::to_string(bits));
  }
  ModalityMask m;
  m.bits_ = bits;
  return m;
}

ModalityMask ModalityMask::parse(const std::string& text) {
  if (text == "all") return ModalityMask();
  unsigned bits = 0;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    bits |= bit(parse_modality(item.substr(b, e - b + 1)));
  }
  if (bits == 0) throw ConfigError("modality list '" + text + "' is empty");
  return from_bits(bits);
}

std::vector<ModalityMask> ModalityMask::all_subsets() {
  std::vector<ModalityMask> out;
  for (unsigned b = 1; b <= 7; ++b) out.push_back(from_bits(b));
  return out;
}

ModalityMask ModalityMask::without(Modality m) const {
  return from_bits(bits_ & ~bit(m));
}

std::size_t ModalityMask::count() const {
  return static_cast<std::size_t>((bits_ & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1));
}

std::string ModalityMask::to_string() const {
  std::string out;
  for (Modality m : kAllModalities) {
    if (!contains(m)) continue;
    if (!out.empty()) out += ',';
    out += modality_name(m);
  }
  return out;
}

ModalityMask sample_modality_mask(Rng& rng, double p_drop) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) {
    throw ConfigError("modality drop probability must be in [0, 1)");
  }
  for (;;) {
    unsigned bits = 0;
    for (unsigned m = 0; m < 3; ++m)
      if (!rng.bernoulli(p_drop)) bits |= 1u << m;
    if (bits != 0) return ModalityMask::from_bits(bits);
  }
}

double expected_drop_rate(double p) {
  return p * (1.0 - p * p) / (1.0 - p * p * p);
}

// ---------------------------------------------------------------------------
// Relation biases

std::size_t spd_bucket(int hops, std::size_t spd_max) {
  if (hops == kUnreachable) return spd_max + 1;
  if (hops < 0) throw ValidationError("negative shortest-path entry");
  return std::min(static_cast<std::size_t>(hops), spd_max);
}

Var build_phi_2d(const SpdMatrix& spd, const Var& table, std::size_t spd_max) {
  const std::size_t buckets = spd_max + 2;
  if (table.value().rank() != 2 || table.cols() != buckets) {
    throw ShapeError("spd table " + shape_string(table.shape()) + " needs " +
                     std::to_string(buckets) + " buckets per head");
  }
  const std::size_t heads = table.rows(), n = spd.n;
  std::vector<std::size_t> idx(heads * n * n);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        idx[(h * n + i) * n + j] = h * buckets + (i == j ? 0 : spd_bucket(spd(i, j), spd_max));
  return take(table, std::move(idx), {heads, n, n});
}

Var gaussian_kernels(const Tensor& dist, const Var& mu, const Var& sigma) {
  require_rank(dist, 2, "gaussian_kernels");
  const std::size_t n = dist.rows(), k_count = mu.value().size();
  if (dist.cols() != n) throw ShapeError("gaussian_kernels: distance matrix not square");
  if (sigma.value().size() != k_count) {
    throw ShapeError("gaussian_kernels: mu and sigma sizes differ");
  }
  std::vector<double> s(k_count);
  std::vector<double> ds(k_count);  // d|sigma| / d sigma, 0 when floored
  for (std::size_t k = 0; k < k_count; ++k) {
    const double raw = sigma.value()[k];
    if (std::abs(raw) < kSigmaFloor) {
      spdlog::warn("gaussian kernel {}: |sigma| = {:.3g} below {:.0e}, clamped", k,
                   std::abs(raw), kSigmaFloor);
      s[k] = kSigmaFloor;
      ds[k] = 0.0;
    } else {
      s[k] = std::abs(raw);
      ds[k] = raw > 0 ? 1.0 : -1.0;
    }
  }
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  Tensor out({n * n, k_count});
  for (std::size_t p = 0; p < n * n; ++p) {
    const double d = dist[p];
    for (std::size_t k = 0; k < k_count; ++k) {
      const double u = (d - mu.value()[k]) / s[k];
      out(p, k) = -norm / s[k] * std::exp(-0.5 * u * u);
    }
  }
  Node* pm = mu.node();
  Node* ps = sigma.node();
  return make_op(std::move(out), {mu, sigma},
                 [pm, ps, dist, s, ds, n, k_count](const Node& self) {
                   Tensor gmu({k_count}), gsig({k_count});
                   for (std::size_t p = 0; p < n * n; ++p) {
                     for (std::size_t k = 0; k < k_count; ++k) {
                       const double g = self.grad(p, k);
                       if (g == 0.0) continue;
                       const double psi = self.value(p, k);
                       const double u = (dist[p] - pm->value[k]) / s[k];
                       gmu[k] += g * psi * u / s[k];
                       gsig[k] += g * psi * (u * u - 1.0) / s[k] * ds[k];
                     }
                   }
                   if (pm->requires_grad) accumulate(pm, gmu);
                   if (ps->requires_grad) accumulate(ps, gsig);
                 });
}

Var build_phi_3d(const Var& psi, std::size_t n, const Mlp& mlp) {
  if (psi.rows() != n * n) {
    throw ShapeError("build_phi_3d: expected " + std::to_string(n * n) +
                     " atom pairs, got " + std::to_string(psi.rows()));
  }
  Var pair_out = mlp(psi);  // (n*n) x heads
  const std::size_t heads = pair_out.cols();
  std::vector<std::size_t> idx(heads * n * n);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t p = 0; p < n * n; ++p) idx[h * n * n + p] = p * heads + h;
  return take(pair_out, std::move(idx), {heads, n, n});
}

Var co_attention_block(const Var& z, const Var& bias, const AttentionWeights& w,
                       std::size_t heads) {
  AttentionOptions opts;
  opts.heads = heads;
  return add(z, biased_attention(z, z, z, bias, w, opts));
}

Var unify_layer(const Var& queries, std::span<const Var> streams,
                const AttentionWeights& w, std::size_t heads) {
  if (streams.empty()) {
    throw ShapeError("unify_layer: no active modality streams");
  }
  Var keys = streams.size() == 1 ? streams.front() : concat_rows(streams);
  if (keys.rows() == 0) {
    const std::size_t width = w.wo ? w.wo.cols() : w.wv.cols();
    return constant(Tensor({queries.rows(), width}));
  }
  AttentionOptions opts;
  opts.heads = heads;
  return biased_attention(queries, keys, keys, Var{}, w, opts);
}

Var assemble_unified_tokens(std::span<const Var> per_layer, const Mlp& mlp) {
  if (per_layer.empty()) throw ShapeError("assemble_unified_tokens: no layers");
  const Shape& first = per_layer.front().shape();
  for (const Var& p : per_layer) {
    if (p.shape() != first) {
      throw ShapeError("assemble_unified_tokens: layer shapes " +
                       shape_string(first) + " and " + shape_string(p.shape()));
    }
  }
  return mlp(per_layer.size() == 1 ? per_layer.front() : concat_rows(per_layer));
}

// ---------------------------------------------------------------------------
// Projector

Projector Projector::create(ParameterStore& store, const ProjectorConfig& cfg,
                            Rng& rng, const std::string& prefix) {
  if (cfg.layers == 0 || cfg.d == 0 || cfg.query_tokens == 0 || cfg.heads == 0 ||
      cfg.kernels == 0) {
    throw ConfigError("projector layers, width, query tokens, heads and kernels must be positive");
  }
  for (std::size_t width : {cfg.d, cfg.d2, cfg.d3}) {
    if (width % cfg.heads != 0) {
      throw ConfigError("width " + std::to_string(width) + " not divisible by " +
                        std::to_string(cfg.heads) + " heads");
    }
  }
  if (!(cfg.sigma_init > 0.0)) throw ConfigError("kernel sigma init must be positive");

  Projector p;
  p.cfg_ = cfg;
  p.spd_table_ = store.add(prefix + ".spd_table",
                           normal_tensor({cfg.heads, cfg.spd_max + 2}, 0.1, rng));
  Tensor mu({cfg.kernels});
  for (std::size_t k = 0; k < cfg.kernels; ++k) {
    mu[k] = cfg.kernels == 1 ? 0.0
                             : cfg.mu_max * static_cast<double>(k) /
                                   static_cast<double>(cfg.kernels - 1);
  }
  p.mu_ = store.add(prefix + ".kernel_mu", std::move(mu));
  Tensor sigma({cfg.kernels});
  for (auto& v : sigma.data()) v = cfg.sigma_init;
  p.sigma_ = store.add(prefix + ".kernel_sigma", std::move(sigma));
  p.phi3d_mlp_ = Mlp::create(store, prefix + ".phi3d_mlp",
                             {cfg.kernels, cfg.kernels, cfg.heads}, Activation::gelu, rng);

  const std::array<std::size_t, 2> atom_widths = {cfg.d2, cfg.d3};
  for (std::size_t s = 0; s < 2; ++s) {
    const std::string tag = s == 0 ? "2d" : "3d";
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      p.stream_attn_[s].push_back(AttentionWeights::create(
          store, prefix + ".coattn." + tag + ".l" + std::to_string(l), atom_widths[s], rng));
    }
  }
  const std::array<std::size_t, 3> widths = {cfg.d1, cfg.d2, cfg.d3};
  for (Modality m : kAllModalities) {
    const auto i = static_cast<std::size_t>(m);
    p.proj_[i] = Linear::create(store, prefix + ".proj." + modality_name(m), widths[i],
                                cfg.d, rng);
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    p.query_base_.push_back(store.add(prefix + ".query.base.l" + std::to_string(l),
                                      normal_tensor({cfg.query_tokens, cfg.d}, 0.5, rng)));
  }
  for (Modality m : kAllModalities) {
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      p.query_modality_[static_cast<std::size_t>(m)].push_back(store.add(
          prefix + ".query." + modality_name(m) + ".l" + std::to_string(l),
          normal_tensor({cfg.query_tokens, cfg.d}, 0.5, rng)));
    }
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    p.unify_attn_.push_back(AttentionWeights::create(
        store, prefix + ".unify.l" + std::to_string(l), cfg.d, rng));
  }
  p.out_mlp_ = Mlp::create(store, prefix + ".out_mlp", {cfg.d, cfg.d, cfg.d},
                           Activation::gelu, rng);
  return p;
}

Var Projector::phi_2d(const SpdMatrix& spd) const {
  return build_phi_2d(spd, spd_table_, cfg_.spd_max);
}

Var Projector::phi_3d(const Tensor& dist) const {
  return build_phi_3d(gaussian_kernels(dist, mu_, sigma_), dist.rows(), phi3d_mlp_);
}

Var Projector::relation_bias(const ProjectorInputs& in, const ModalityMask& mask) const {
  if (!cfg_.co_attention) return {};
  Var bias;
  if (mask.contains(Modality::two_d)) {
    if (!in.spd) throw ModalityUnavailable("2d relation bias needs a shortest-path matrix");
    bias = phi_2d(*in.spd);
  }
  if (mask.contains(Modality::three_d)) {
    if (!in.dist) throw ModalityUnavailable("3d relation bias needs a distance matrix");
    Var phi3 = phi_3d(*in.dist);
    bias = bias ? add(bias, phi3) : phi3;
  }
  return bias;
}

ProcessedStreams Projector::process_modality_layers(const ProjectorInputs& in,
                                                    const ModalityMask& mask) const {
  ProcessedStreams out;
  const Var bias = relation_bias(in, mask);
  for (Modality m : kAllModalities) {
    if (!mask.contains(m)) continue;
    const auto mi = static_cast<std::size_t>(m);
    const auto& states = m == Modality::one_d   ? in.one_d
                         : m == Modality::two_d ? in.two_d
                                                : in.three_d;
    if (!states) {
      throw ModalityUnavailable("modality " + modality_name(m) +
                                " is active but has no hidden states");
    }
    if (states->layers.size() != cfg_.layers) {
      throw ShapeError(modality_name(m) + " stream has " +
                       std::to_string(states->layers.size()) + " layers, expected " +
                       std::to_string(cfg_.layers));
    }
    if (m == Modality::one_d) {
      const Var projected = proj_[mi](states->layers.front());
      out.layers[mi].assign(cfg_.layers, projected);
      continue;
    }
    const auto& attn = stream_attn_[m == Modality::two_d ? 0 : 1];
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const Var& z = states->layers[l];
      if (bias && bias.shape()[1] != z.rows()) {
        throw ShapeError("relation bias " + shape_string(bias.shape()) + " for " +
                         std::to_string(z.rows()) + " atoms");
      }
      out.layers[mi].push_back(proj_[mi](co_attention_block(z, bias, attn[l], cfg_.heads)));
    }
  }
  return out;
}

Var Projector::queries(std::size_t layer, const ModalityMask& mask) const {
  Var q = query_base_.at(layer);
  if (!cfg_.modality_embedding) return q;
  for (Modality m : kAllModalities)
    if (mask.contains(m)) q = add(q, query_modality_[static_cast<std::size_t>(m)][layer]);
  return q;
}

UnifiedMoleculeTokens Projector::forward(const ProjectorInputs& in,
                                         const ModalityMask& mask) const {
  const ProcessedStreams streams = process_modality_layers(in, mask);
  std::vector<Var> per_layer;
  per_layer.reserve(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    std::vector<Var> active;
    for (Modality m : kAllModalities)
      if (mask.contains(m)) active.push_back(streams.layers[static_cast<std::size_t>(m)][l]);
    per_layer.push_back(unify_layer(queries(l, mask), active, unify_attn_[l], cfg_.heads));
  }
  return {assemble_unified_tokens(per_layer, out_mlp_), mask};
}

std::size_t Projector::clamp_sigma() const {
  Var sigma = sigma_;
  std::size_t moved = 0;
  for (auto& v : sigma.mutable_value().data()) {
    if (std::abs(v) < kSigmaFloor) {
      v = v < 0 ? -kSigmaFloor : kSigmaFloor;
      ++moved;
    }
  }
  return moved;
}

const AttentionWeights& Projector::stream_attention(Modality m, std::size_t layer) const {
  if (m == Modality::one_d) throw ConfigError("the 1d stream has no attention");
  return stream_attn_[m == Modality::two_d ? 0 : 1].at(layer);
}

const Linear& Projector::stream_projection(Modality m) const {
  return proj_[static_cast<std::size_t>(m)];
}

const AttentionWeights& Projector::unify_attention(std::size_t layer) const {
  return unify_attn_.at(layer);
}

}  // namespace molproj
