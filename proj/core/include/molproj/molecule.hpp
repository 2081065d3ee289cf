// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "molproj/tensor.hpp"

namespace molproj {

struct Bond {
  std::size_t i = 0;
  std::size_t j = 0;
  int order = 1;

  friend bool operator==(const Bond&, const Bond&) = default;
};

/// One molecule carried in three aligned views: a SELFIES string, an
/// atom/bond graph, and optional per-atom 3D coordinates (same atom order as
/// the graph).
struct Molecule {
  std::string id;
  std::string selfies;
  std::vector<std::string> atoms;
  std::vector<Bond> bonds;
  std::optional<Tensor> coords;  // n x 3, Angstrom
  std::optional<std::string> caption;
  std::map<std::string, double> properties;

  std::size_t atom_count() const { return atoms.size(); }
  bool has_coords() const { return coords.has_value(); }

  friend bool operator==(const Molecule&, const Molecule&) = default;
};

/// Throws ValidationError naming the molecule id when any invariant fails:
/// bond endpoints in range, no self-loops or duplicate pairs, coordinate rows
/// matching the atom count, finite coordinates, lexically valid SELFIES.
void validate(const Molecule& mol);

/// Relabels atoms: old atom i becomes new atom perm[i]. Bonds, coordinates
/// and everything else follow; the SELFIES string is unchanged.
Molecule permute_atoms(const Molecule& mol, std::span<const std::size_t> perm);

/// Sentinel stored for atom pairs in different connected components.
inline constexpr int kUnreachable = -1;

/// Square integer matrix of shortest-path hop counts.
struct SpdMatrix {
  std::size_t n = 0;
  std::vector<int> hops;  // row-major n x n

  int operator()(std::size_t i, std::size_t j) const { return hops[i * n + j]; }
  friend bool operator==(const SpdMatrix&, const SpdMatrix&) = default;
};

struct StructMatrices {
  SpdMatrix spd;
  std::optional<Tensor> dist;  // present when the molecule has coordinates
};

/// Unweighted BFS from every atom.
SpdMatrix shortest_path_matrix(const Molecule& mol);

/// Euclidean distance matrix of an n x 3 coordinate tensor.
Tensor pairwise_distances(const Tensor& coords);

StructMatrices struct_matrices(const Molecule& mol);

/// Number of independent cycles (bonds - atoms + components).
std::size_t ring_count(const Molecule& mol);

}  // namespace molproj
