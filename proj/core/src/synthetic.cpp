// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "molproj/errors.hpp"
#include "molproj/random.hpp"
#include "molproj/selfies.hpp"

namespace molproj {

namespace {

struct ElementSpec {
  const char* symbol;
  int max_valence;
  double weight;
};

constexpr std::array<ElementSpec, 5> kElements = {{
    {"C", 4, 0.55},
    {"N", 3, 0.15},
    {"O", 2, 0.18},
    {"S", 2, 0.05},
    {"F", 1, 0.07},
}};

int max_valence(const std::string& symbol) {
  for (const auto& e : kElements)
    if (symbol == e.symbol) return e.max_valence;
  return 4;
}

constexpr double kBondLength = 1.0;
constexpr double kContactRadius = 1.6;

}  // namespace

const std::vector<std::pair<std::string, std::string>>& caption_elements() {
  static const std::vector<std::pair<std::string, std::string>> names = {
      {"C", "carbon"}, {"N", "nitrogen"}, {"O", "oxygen"},
      {"S", "sulfur"}, {"F", "fluorine"}};
  return names;
}

std::string describe_molecule(const Molecule& mol) {
  std::vector<std::string> parts;
  for (const auto& [symbol, name] : caption_elements()) {
    const auto k = std::count(mol.atoms.begin(), mol.atoms.end(), symbol);
    if (symbol == "C" || k > 0) {
      parts.push_back(std::to_string(k) + " " + name + " atoms");
    }
  }
  std::string text = "a molecule with ";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) text += (i + 1 == parts.size()) ? " and " : " , ";
    text += parts[i];
  }
  text += " .";
  const std::size_t rings = ring_count(mol);
  if (rings == 0) {
    text += " it is acyclic .";
  } else if (rings == 1) {
    text += " it contains a ring .";
  } else {
    text += " it contains " + std::to_string(rings) + " rings .";
  }
  const bool has_double = std::any_of(mol.bonds.begin(), mol.bonds.end(),
                                      [](const Bond& b) { return b.order == 2; });
  if (has_double) text += " it has a double bond .";
  return text;
}

std::map<std::string, double> toy_properties(const Molecule& mol) {
  std::map<std::string, double> props;
  props["atom_count"] = static_cast<double>(mol.atom_count());
  props["bond_count"] = static_cast<double>(mol.bonds.size());
  props["ring_count"] = static_cast<double>(ring_count(mol));
  if (mol.coords) {
    const Tensor dist = pairwise_distances(*mol.coords);
    const std::size_t n = mol.atom_count();
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        total += dist(i, j);
        ++pairs;
      }
    props["mean_distance"] = pairs ? total / static_cast<double>(pairs) : 0.0;
  }
  return props;
}

Tensor embed_coordinates(const Molecule& mol, std::uint64_t seed) {
  const std::size_t n = mol.atom_count();
  Rng rng(seed);
  const double box = std::cbrt(static_cast<double>(std::max<std::size_t>(n, 1)));
  Tensor pos({n, 3});
  for (auto& v : pos.data()) v = rng.uniform(-box, box);

  std::vector<char> bonded(n * n, 0);
  for (const Bond& b : mol.bonds) {
    bonded[b.i * n + b.j] = 1;
    bonded[b.j * n + b.i] = 1;
  }
  constexpr int kIterations = 1500;
  constexpr double kStep = 0.05;
  Tensor force({n, 3});
  for (int it = 0; it < kIterations; ++it) {
    std::fill(force.data().begin(), force.data().end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double delta[3];
        double d2 = 0.0;
        for (int k = 0; k < 3; ++k) {
          delta[k] = pos(i, k) - pos(j, k);
          d2 += delta[k] * delta[k];
        }
        const double d = std::sqrt(d2) + 1e-12;
        double coeff = 0.0;  // dE/dd
        if (bonded[i * n + j]) {
          coeff = 2.0 * (d - kBondLength);
        } else if (d < kContactRadius) {
          coeff = -2.0 * (kContactRadius - d);
        }
        if (coeff == 0.0) continue;
        for (int k = 0; k < 3; ++k) {
          const double f = coeff * delta[k] / d;
          force(i, k) -= f;
          force(j, k) += f;
        }
      }
    }
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] += kStep * force[i];
  }
  // Center on the centroid.
  for (int k = 0; k < 3; ++k) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += pos(i, k);
    c /= static_cast<double>(std::max<std::size_t>(n, 1));
    for (std::size_t i = 0; i < n; ++i) pos(i, k) -= c;
  }
  return pos;
}

std::vector<Molecule> generate_synthetic(std::uint64_t seed, std::size_t count,
                                         std::size_t max_atoms) {
  if (max_atoms < 2) throw ConfigError("generate_synthetic: max_atoms must be >= 2");
  Rng rng = Rng::stream(seed, "synthetic");
  std::vector<Molecule> out;
  out.reserve(count);
  for (std::size_t m = 0; m < count; ++m) {
    Molecule mol;
    char id[48];
    std::snprintf(id, sizeof id, "syn-%llu-%04zu",
                  static_cast<unsigned long long>(seed), m);
    mol.id = id;

    const std::size_t n = 2 + rng.index(max_atoms - 1);
    std::vector<int> degree(n, 0);
    auto adjacent = [&](std::size_t a, std::size_t b) {
      return std::any_of(mol.bonds.begin(), mol.bonds.end(), [&](const Bond& x) {
        return (x.i == a && x.j == b) || (x.i == b && x.j == a);
      });
    };
    for (std::size_t k = 1; k < n; ++k) {
      std::size_t parent = rng.index(k);
      while (degree[parent] >= 4) parent = rng.index(k);
      mol.bonds.push_back({parent, k, 1});
      ++degree[parent];
      ++degree[k];
    }
    const std::size_t extra = rng.index(3);
    for (std::size_t e = 0, tries = 0; e < extra && tries < 20 && n >= 3; ++tries) {
      const std::size_t a = rng.index(n);
      const std::size_t b = rng.index(n);
      if (a == b || adjacent(a, b) || degree[a] >= 3 || degree[b] >= 3) continue;
      mol.bonds.push_back({std::min(a, b), std::max(a, b), 1});
      ++degree[a];
      ++degree[b];
      ++e;
    }

    mol.atoms.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (const auto& el : kElements)
        if (el.max_valence >= degree[i]) total += el.weight;
      double draw = rng.uniform() * total;
      mol.atoms[i] = "C";
      for (const auto& el : kElements) {
        if (el.max_valence < degree[i]) continue;
        if (draw < el.weight) {
          mol.atoms[i] = el.symbol;
          break;
        }
        draw -= el.weight;
      }
    }

    std::vector<int> used(degree.begin(), degree.end());
    for (auto& b : mol.bonds) {
      const bool spare = used[b.i] < max_valence(mol.atoms[b.i]) &&
                         used[b.j] < max_valence(mol.atoms[b.j]);
      if (spare && rng.bernoulli(0.12)) {
        b.order = 2;
        ++used[b.i];
        ++used[b.j];
      }
    }

    mol.coords = embed_coordinates(mol, rng.next());
    mol.selfies = write_selfies(mol);
    mol.caption = describe_molecule(mol);
    mol.properties = toy_properties(mol);
    validate(mol);
    out.push_back(std::move(mol));
  }
  return out;
}

}  // namespace molproj
