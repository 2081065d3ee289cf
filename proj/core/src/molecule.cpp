// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/molecule.hpp"

#include <cmath>
#include <deque>
#include <set>
#include <utility>

#include "molproj/errors.hpp"
#include "molproj/selfies.hpp"

namespace molproj {

void validate(const Molecule& mol) {
  const std::string where = "molecule '" + mol.id + "': ";
  const std::size_t n = mol.atom_count();
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const Bond& b : mol.bonds) {
    if (b.i >= n || b.j >= n) {
      throw ValidationError(where + "bond (" + std::to_string(b.i) + ", " +
                            std::to_string(b.j) + ") references a missing atom");
    }
    if (b.i == b.j) {
      throw ValidationError(where + "self-bond on atom " + std::to_string(b.i));
    }
    if (!seen.insert(std::minmax(b.i, b.j)).second) {
      throw ValidationError(where + "duplicate bond (" + std::to_string(b.i) +
                            ", " + std::to_string(b.j) + ")");
    }
    if (b.order < 1 || b.order > 3) {
      throw ValidationError(where + "bond order " + std::to_string(b.order) +
                            " outside 1..3");
    }
  }
  if (mol.coords) {
    const Tensor& c = *mol.coords;
    if (c.rank() != 2 || c.cols() != 3) {
      throw ValidationError(where + "coordinates must be n x 3, got " +
                            shape_string(c.shape()));
    }
    if (c.rows() != n) {
      throw ValidationError(where + std::to_string(n) + " atoms but " +
                            std::to_string(c.rows()) + " coordinate rows");
    }
    if (!c.all_finite()) {
      throw ValidationError(where + "non-finite coordinate");
    }
  }
  try {
    split_selfies(mol.selfies);
  } catch (const ParseError& e) {
    throw ValidationError(where + "selfies: " + e.what());
  }
}

Molecule permute_atoms(const Molecule& mol, std::span<const std::size_t> perm) {
  const std::size_t n = mol.atom_count();
  if (perm.size() != n) {
    throw ShapeError("permutation of length " + std::to_string(perm.size()) +
                     " for " + std::to_string(n) + " atoms");
  }
  std::vector<bool> hit(n, false);
  for (std::size_t p : perm) {
    if (p >= n || hit[p]) throw ShapeError("not a permutation");
    hit[p] = true;
  }
  Molecule out = mol;
  for (std::size_t i = 0; i < n; ++i) out.atoms[perm[i]] = mol.atoms[i];
  for (auto& b : out.bonds) {
    b.i = perm[b.i];
    b.j = perm[b.j];
  }
  if (mol.coords) {
    Tensor c({n, 3});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 3; ++k) c(perm[i], k) = (*mol.coords)(i, k);
    out.coords = std::move(c);
  }
  return out;
}

SpdMatrix shortest_path_matrix(const Molecule& mol) {
  const std::size_t n = mol.atom_count();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Bond& b : mol.bonds) {
    adj[b.i].push_back(b.j);
    adj[b.j].push_back(b.i);
  }
  SpdMatrix spd{n, std::vector<int>(n * n, kUnreachable)};
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    int* row = spd.hops.data() + s * n;
    row[s] = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v : adj[u]) {
        if (row[v] == kUnreachable) {
          row[v] = row[u] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  return spd;
}

Tensor pairwise_distances(const Tensor& coords) {
  if (coords.rank() != 2 || coords.cols() != 3) {
    throw ShapeError("pairwise_distances: expected n x 3 coordinates, got " +
                     shape_string(coords.shape()));
  }
  const std::size_t n = coords.rows();
  Tensor dist({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = coords(i, 0) - coords(j, 0);
      const double dy = coords(i, 1) - coords(j, 1);
      const double dz = coords(i, 2) - coords(j, 2);
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

StructMatrices struct_matrices(const Molecule& mol) {
  StructMatrices m{shortest_path_matrix(mol), std::nullopt};
  if (mol.coords) m.dist = pairwise_distances(*mol.coords);
  return m;
}

std::size_t ring_count(const Molecule& mol) {
  const std::size_t n = mol.atom_count();
  if (n == 0) return 0;
  const SpdMatrix spd = shortest_path_matrix(mol);
  std::vector<bool> assigned(n, false);
  std::size_t components = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i]) continue;
    ++components;
    for (std::size_t j = 0; j < n; ++j)
      if (spd(i, j) != kUnreachable) assigned[j] = true;
  }
  return mol.bonds.size() + components - n;
}

}  // namespace molproj
