// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molproj/molecule.hpp"

namespace molproj {

/// Element names used in captions, in caption order.
const std::vector<std::pair<std::string, std::string>>& caption_elements();

/// Caption from element counts, ring count and double-bond presence, e.g.
/// "a molecule with 4 carbon atoms , 1 oxygen atoms . it contains a ring ."
std::string describe_molecule(const Molecule& mol);

/// Toy properties: atom_count, bond_count, ring_count, mean_distance.
std::map<std::string, double> toy_properties(const Molecule& mol);

/// Deterministic small molecules: random trees over {C,N,O,S,F} with up to
/// two ring-closing edges, 3D coordinates relaxed with unit-length bond
/// springs plus short-range repulsion, SELFIES written from the graph,
/// templated caption and toy properties. Atom counts are uniform in
/// [min(2, max_atoms), max_atoms].
std::vector<Molecule> generate_synthetic(std::uint64_t seed, std::size_t count,
                                         std::size_t max_atoms);

/// Spring-relaxed coordinates for an arbitrary graph.
Tensor embed_coordinates(const Molecule& mol, std::uint64_t seed);

}  // namespace molproj
