// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/encoders.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "molproj/errors.hpp"

namespace molproj {

namespace {

constexpr std::array<std::string_view, 10> kElementTable = {
    "H", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I"};

std::vector<std::vector<std::size_t>> adjacency_lists(const Molecule& mol) {
  std::vector<std::vector<std::size_t>> adj(mol.atom_count());
  for (const Bond& b : mol.bonds) {
    adj[b.i].push_back(b.j);
    adj[b.j].push_back(b.i);
  }
  return adj;
}

Var element_features(const Var& table, const Molecule& mol) {
  const std::size_t n = mol.atom_count();
  const std::size_t d = table.cols();
  std::vector<std::size_t> idx;
  idx.reserve(n * d);
  for (const auto& symbol : mol.atoms) {
    const std::size_t row = element_index(symbol);
    for (std::size_t c = 0; c < d; ++c) idx.push_back(row * d + c);
  }
  return take(table, std::move(idx), {n, d});
}

}  // namespace

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::one_d: return "1d";
    case Modality::two_d: return "2d";
    case Modality::three_d: return "3d";
  }
  return "?";
}

Modality parse_modality(const std::string& name) {
  if (name == "1d") return Modality::one_d;
  if (name == "2d") return Modality::two_d;
  if (name == "3d") return Modality::three_d;
  throw ConfigError("unknown modality '" + name + "' (expected 1d, 2d or 3d)");
}

std::size_t element_index(const std::string& symbol) {
  for (std::size_t i = 0; i < kElementTable.size(); ++i)
    if (kElementTable[i] == symbol) return i;
  return kElementTable.size();
}

std::size_t element_vocab_size() { return kElementTable.size() + 1; }

Var neighbor_sum(const Var& h,
                 const std::vector<std::vector<std::size_t>>& adjacency) {
  const std::size_t n = h.rows(), d = h.cols();
  if (adjacency.size() != n) {
    throw ShapeError("neighbor_sum: adjacency for " +
                     std::to_string(adjacency.size()) + " atoms, features for " +
                     std::to_string(n));
  }
  Tensor out({n, d});
  std::vector<double> terms;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      terms.clear();
      for (std::size_t j : adjacency[i]) terms.push_back(h.value()(j, c));
      std::sort(terms.begin(), terms.end());
      double acc = 0.0;
      for (double t : terms) acc += t;
      out(i, c) = acc;
    }
  }
  Node* ph = h.node();
  return make_op(std::move(out), {h}, [ph, adjacency, n, d](const Node& self) {
    auto& buf = grad_buffer(ph);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j : adjacency[i])
        for (std::size_t c = 0; c < d; ++c) buf(j, c) += self.grad(i, c);
  });
}

TokenEmbedder TokenEmbedder::create(ParameterStore& store,
                                    const std::string& name,
                                    std::size_t vocab_size,
                                    const EncoderConfig& cfg, Rng& rng) {
  TokenEmbedder e;
  e.table_ = store.add(name + ".embedding",
                       normal_tensor({vocab_size, cfg.d1}, 1.0, rng));
  e.layers_ = cfg.layers;
  return e;
}

ModalityHiddenStates TokenEmbedder::embed(std::span<const std::size_t> ids) const {
  const std::size_t vocab = table_.rows();
  const std::size_t d = table_.cols();
  std::vector<std::size_t> idx;
  idx.reserve(ids.size() * d);
  for (std::size_t id : ids) {
    if (id >= vocab) {
      throw ShapeError("token id " + std::to_string(id) +
                       " out of range for vocabulary of " + std::to_string(vocab));
    }
    for (std::size_t c = 0; c < d; ++c) idx.push_back(id * d + c);
  }
  Var emb = take(table_, std::move(idx), {ids.size(), d});
  return {Modality::one_d, std::vector<Var>(layers_, emb)};
}

GraphEncoder GraphEncoder::create(ParameterStore& store, const std::string& name,
                                  const EncoderConfig& cfg, Rng& rng) {
  GraphEncoder g;
  g.element_table_ = store.add(name + ".element_embedding",
                               normal_tensor({element_vocab_size(), cfg.d2}, 1.0, rng));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string round = name + ".round" + std::to_string(l);
    g.eps_.push_back(store.add(round + ".eps", Tensor({1})));
    g.rounds_.push_back(Mlp::create(store, round + ".mlp", {cfg.d2, cfg.d2, cfg.d2},
                                    Activation::gelu, rng));
  }
  return g;
}

ModalityHiddenStates GraphEncoder::encode(const Molecule& mol) const {
  const auto adj = adjacency_lists(mol);
  Var h = element_features(element_table_, mol);
  ModalityHiddenStates out{Modality::two_d, {}};
  for (std::size_t l = 0; l < rounds_.size(); ++l) {
    Var self_term = add(h, scale_by(h, eps_[l]));
    h = rounds_[l](add(self_term, neighbor_sum(h, adj)));
    out.layers.push_back(h);
  }
  return out;
}

ConformerEncoder ConformerEncoder::create(ParameterStore& store,
                                          const std::string& name,
                                          const EncoderConfig& cfg, Rng& rng) {
  ConformerEncoder e;
  e.element_table_ = store.add(name + ".element_embedding",
                               normal_tensor({element_vocab_size(), cfg.d3}, 1.0, rng));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    e.rounds_.push_back(Mlp::create(store, name + ".round" + std::to_string(l) + ".mlp",
                                    {cfg.d3, cfg.d3, cfg.d3}, Activation::gelu, rng));
  }
  e.tau_ = cfg.tau;
  return e;
}

ModalityHiddenStates ConformerEncoder::encode(const Molecule& mol) const {
  if (!mol.coords) {
    throw ModalityUnavailable("molecule '" + mol.id + "' has no 3D coordinates");
  }
  return encode_distances(mol, pairwise_distances(*mol.coords));
}

ModalityHiddenStates ConformerEncoder::encode_distances(const Molecule& mol,
                                                        const Tensor& dist) const {
  const std::size_t n = mol.atom_count();
  Tensor weights({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) weights(i, j) = std::exp(-dist(i, j) * dist(i, j) / tau_);
  const Var w = constant(std::move(weights));
  Var h = element_features(element_table_, mol);
  ModalityHiddenStates out{Modality::three_d, {}};
  for (const auto& round : rounds_) {
    h = round(add(h, matmul(w, h)));
    out.layers.push_back(h);
  }
  return out;
}

Encoders Encoders::create(ParameterStore& store, const EncoderConfig& cfg,
                          std::size_t selfies_vocab_size, Rng& rng) {
  if (cfg.layers == 0 || cfg.d1 == 0 || cfg.d2 == 0 || cfg.d3 == 0) {
    throw ConfigError("encoder layers and widths must be positive");
  }
  if (!(cfg.tau > 0.0)) throw ConfigError("encoder tau must be positive");
  Encoders e;
  e.config = cfg;
  e.one_d = TokenEmbedder::create(store, "encoder.1d", selfies_vocab_size, cfg, rng);
  e.two_d = GraphEncoder::create(store, "encoder.2d", cfg, rng);
  e.three_d = ConformerEncoder::create(store, "encoder.3d", cfg, rng);
  return e;
}

}  // namespace molproj
