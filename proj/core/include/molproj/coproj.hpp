// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Modality-collaborative projector. Atom-level 2D/3D hidden states go
// through self-attention biased by shortest-path and Gaussian-kernel distance
// terms; every stream is projected to a shared width; learnable query tokens
// (plus per-modality embeddings) cross-attend to the concatenated active
// streams once per encoder layer; an MLP maps the stacked per-layer queries
// to a fixed-length block of molecule tokens.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "molproj/encoders.hpp"
#include "molproj/molecule.hpp"
#include "molproj/nn.hpp"
#include "molproj/random.hpp"

namespace molproj {

/// Nonempty subset of {1d, 2d, 3d}.
class ModalityMask {
 public:
  /// All modalities active.
  ModalityMask();
  /// Throws ConfigError on an empty set.
  explicit ModalityMask(std::initializer_list<Modality> active);
  static ModalityMask from_bits(unsigned bits);
  /// Comma-separated names, e.g. "1d,3d" or "all".
  static ModalityMask parse(const std::string& text);
  /// The seven nonempty subsets in bit order.
  static std::vector<ModalityMask> all_subsets();

  bool contains(Modality m) const { return bits_ & bit(m); }
  ModalityMask without(Modality m) const;  // throws if it would become empty
  unsigned bits() const { return bits_; }
  std::size_t count() const;
  std::string to_string() const;

  bool operator==(const ModalityMask&) const = default;

 private:
  static unsigned bit(Modality m) { return 1u << static_cast<unsigned>(m); }
  unsigned bits_ = 7;
};

/// Each modality dropped independently with probability p_drop; an empty draw
/// is rejected and redrawn. Throws ConfigError unless 0 <= p_drop < 1.
ModalityMask sample_modality_mask(Rng& rng, double p_drop);

/// P(modality m dropped | mask nonempty), by enumerating the nonempty outcomes.
double expected_drop_rate(double p_drop);

struct ProjectorConfig {
  std::size_t layers = 3;  // encoder layers consumed
  std::size_t d1 = 32, d2 = 32, d3 = 32;
  std::size_t d = 64;
  std::size_t query_tokens = 8;
  std::size_t heads = 4;
  std::size_t kernels = 16;
  std::size_t spd_max = 8;
  double mu_max = 8.0;
  double sigma_init = 0.5;
  /// Ablation switches: without co_attention the relation biases are dropped;
  /// without modality_embedding the queries are the base tokens only.
  bool co_attention = true;
  bool modality_embedding = true;
};

inline constexpr double kSigmaFloor = 1e-4;

/// Bucket of a shortest-path entry: diagonal 0, clip at spd_max,
/// unreachable spd_max + 1.
std::size_t spd_bucket(int hops, std::size_t spd_max);

/// heads x n x n bias, out[h][i][j] = table[h][bucket(i, j)].
Var build_phi_2d(const SpdMatrix& spd, const Var& table, std::size_t spd_max);

/// (n*n) x K pair-major kernel values
/// psi[(i*n+j)][k] = -exp(-0.5 ((dist(i,j) - mu_k) / |sigma_k|)^2) / (sqrt(2 pi) |sigma_k|)
/// with |sigma_k| floored at kSigmaFloor (warning logged when the floor is hit).
/// Differentiable in mu and sigma.
Var gaussian_kernels(const Tensor& dist, const Var& mu, const Var& sigma);

/// heads x n x n bias from pair-major kernel values through a shared MLP
/// (output width = heads).
Var build_phi_3d(const Var& psi, std::size_t n, const Mlp& mlp);

/// Z + attention(Z, Z, Z) with logits biased by `bias` (empty, n x n or
/// heads x n x n).
Var co_attention_block(const Var& z, const Var& bias, const AttentionWeights& w,
                       std::size_t heads);

/// Cross-attention of the queries over the row-concatenation of `streams`
/// (no bias, no residual). No key rows gives a zero output.
Var unify_layer(const Var& queries, std::span<const Var> streams,
                const AttentionWeights& w, std::size_t heads);

/// Stacks the per-layer query outputs in layer order and applies the MLP
/// rowwise.
Var assemble_unified_tokens(std::span<const Var> per_layer, const Mlp& mlp);

struct UnifiedMoleculeTokens {
  Var tokens;  // (b * L) x d
  ModalityMask mask;
};

/// Inputs of one projector call. Streams missing from the mask may be absent.
struct ProjectorInputs {
  std::optional<ModalityHiddenStates> one_d;
  std::optional<ModalityHiddenStates> two_d;
  std::optional<ModalityHiddenStates> three_d;
  const SpdMatrix* spd = nullptr;
  const Tensor* dist = nullptr;
};

/// Per-layer processed streams, already projected to width d.
struct ProcessedStreams {
  std::array<std::vector<Var>, 3> layers;  // indexed by Modality
};

class Projector {
 public:
  /// Parameters live under `prefix` (default "coproj").
  static Projector create(ParameterStore& store, const ProjectorConfig& cfg,
                          Rng& rng, const std::string& prefix = "coproj");

  const ProjectorConfig& config() const { return cfg_; }

  /// Sum of the biases of the active 2D/3D modalities (empty Var when none
  /// applies or co-attention is disabled).
  Var relation_bias(const ProjectorInputs& in, const ModalityMask& mask) const;
  Var phi_2d(const SpdMatrix& spd) const;
  Var phi_3d(const Tensor& dist) const;

  ProcessedStreams process_modality_layers(const ProjectorInputs& in,
                                           const ModalityMask& mask) const;
  /// P_base^(l) plus the embeddings of the active modalities.
  Var queries(std::size_t layer, const ModalityMask& mask) const;
  UnifiedMoleculeTokens forward(const ProjectorInputs& in,
                                const ModalityMask& mask) const;

  /// Pushes every |sigma_k| below kSigmaFloor back to the floor, keeping sign.
  /// Returns how many entries moved.
  std::size_t clamp_sigma() const;

  const Var& spd_table() const { return spd_table_; }
  const Var& kernel_mu() const { return mu_; }
  const Var& kernel_sigma() const { return sigma_; }
  const Mlp& phi3d_mlp() const { return phi3d_mlp_; }
  const AttentionWeights& stream_attention(Modality m, std::size_t layer) const;
  const Linear& stream_projection(Modality m) const;
  const AttentionWeights& unify_attention(std::size_t layer) const;
  const Mlp& output_mlp() const { return out_mlp_; }

 private:
  ProjectorConfig cfg_;
  Var spd_table_;
  Var mu_, sigma_;
  Mlp phi3d_mlp_;
  // [0] = 2d stream, [1] = 3d stream; one set of weights per layer.
  std::array<std::vector<AttentionWeights>, 2> stream_attn_;
  std::array<Linear, 3> proj_;
  std::vector<Var> query_base_;
  std::array<std::vector<Var>, 3> query_modality_;
  std::vector<AttentionWeights> unify_attn_;
  Mlp out_mlp_;
};

}  // namespace molproj
