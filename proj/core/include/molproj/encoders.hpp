// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Toy molecule encoders exposing per-layer, per-atom hidden states:
// a SELFIES token embedding (1D), a GIN-style message-passing encoder over
// the bond graph (2D) and a distance-weighted aggregation encoder over
// interatomic distances (3D).

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "molproj/molecule.hpp"
#include "molproj/nn.hpp"

namespace molproj {

enum class Modality { one_d = 0, two_d = 1, three_d = 2 };

inline constexpr Modality kAllModalities[] = {Modality::one_d, Modality::two_d,
                                              Modality::three_d};

std::string modality_name(Modality m);  // "1d", "2d", "3d"
Modality parse_modality(const std::string& name);

struct ModalityHiddenStates {
  Modality modality = Modality::one_d;
  /// One matrix per encoder layer: s x d1 for 1D, n x d2 / n x d3 otherwise.
  std::vector<Var> layers;
};

struct EncoderConfig {
  std::size_t layers = 3;
  std::size_t d1 = 32;
  std::size_t d2 = 32;
  std::size_t d3 = 32;
  double tau = 4.0;  // Angstrom^2, distance weighting exp(-d^2 / tau)
};

/// Index of an element symbol in the atom embedding table; symbols outside
/// the table share the last row.
std::size_t element_index(const std::string& symbol);
std::size_t element_vocab_size();

/// out[i] = sum over neighbors j of h[j], summed in value order per feature
/// so the result is bit-identical under atom relabeling.
Var neighbor_sum(const Var& h, const std::vector<std::vector<std::size_t>>& adjacency);

class TokenEmbedder {
 public:
  static TokenEmbedder create(ParameterStore& store, const std::string& name,
                              std::size_t vocab_size, const EncoderConfig& cfg,
                              Rng& rng);
  /// Embedding lookup, replicated as every layer entry. Throws ShapeError
  /// for ids >= vocab size.
  ModalityHiddenStates embed(std::span<const std::size_t> ids) const;

  const Var& table() const { return table_; }

 private:
  Var table_;
  std::size_t layers_ = 0;
};

class GraphEncoder {
 public:
  static GraphEncoder create(ParameterStore& store, const std::string& name,
                             const EncoderConfig& cfg, Rng& rng);
  /// L rounds of h_i <- MLP((1 + eps_l) h_i + sum_{j in N(i)} h_j).
  ModalityHiddenStates encode(const Molecule& mol) const;

  const Var& element_table() const { return element_table_; }
  const std::vector<Mlp>& rounds() const { return rounds_; }
  const std::vector<Var>& eps() const { return eps_; }

 private:
  Var element_table_;
  std::vector<Mlp> rounds_;
  std::vector<Var> eps_;
};

class ConformerEncoder {
 public:
  static ConformerEncoder create(ParameterStore& store, const std::string& name,
                                 const EncoderConfig& cfg, Rng& rng);
  /// L rounds of h_i <- MLP(h_i + sum_{j != i} exp(-dist(i,j)^2 / tau) h_j).
  /// Only pairwise distances enter, never raw coordinates. Throws
  /// ModalityUnavailable when the molecule has no coordinates.
  ModalityHiddenStates encode(const Molecule& mol) const;
  ModalityHiddenStates encode_distances(const Molecule& mol,
                                        const Tensor& dist) const;

  const Var& element_table() const { return element_table_; }
  const std::vector<Mlp>& rounds() const { return rounds_; }
  double tau() const { return tau_; }

 private:
  Var element_table_;
  std::vector<Mlp> rounds_;
  double tau_ = 4.0;
};

/// All three encoders; parameters live under "encoder.".
struct Encoders {
  TokenEmbedder one_d;
  GraphEncoder two_d;
  ConformerEncoder three_d;
  EncoderConfig config;

  static Encoders create(ParameterStore& store, const EncoderConfig& cfg,
                         std::size_t selfies_vocab_size, Rng& rng);
};

}  // namespace molproj
