// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/selfies.hpp"

#include <algorithm>
#include <array>
#include <functional>

#include "molproj/errors.hpp"

namespace molproj {

std::vector<std::string> split_selfies(std::string_view selfies) {
  std::vector<std::string> symbols;
  std::size_t i = 0;
  while (i < selfies.size()) {
    if (selfies[i] != '[') {
      throw ParseError(std::string("unexpected '") + selfies[i] +
                           "' outside brackets",
                       i);
    }
    std::size_t j = i + 1;
    while (j < selfies.size() && selfies[j] != ']') {
      if (selfies[j] == '[') throw ParseError("nested '['", j);
      ++j;
    }
    if (j == selfies.size()) throw ParseError("unclosed '['", i);
    if (j == i + 1) throw ParseError("empty symbol '[]'", i);
    symbols.emplace_back(selfies.substr(i, j - i + 1));
    i = j + 1;
  }
  return symbols;
}

std::string join_selfies(std::span<const std::string> symbols) {
  std::string out;
  for (const auto& s : symbols) out += s;
  return out;
}

SelfiesVocab::SelfiesVocab() {
  add(std::string(kPadSymbol));
  add(std::string(kUnknownSymbol));
}

SelfiesVocab SelfiesVocab::from_symbols(std::span<const std::string> symbols) {
  SelfiesVocab v;
  for (const auto& s : symbols) v.add(s);
  return v;
}

std::size_t SelfiesVocab::add(const std::string& symbol) {
  auto [it, inserted] = ids_.try_emplace(symbol, symbols_.size());
  if (inserted) symbols_.push_back(symbol);
  return it->second;
}

std::size_t SelfiesVocab::id(const std::string& symbol) const {
  auto it = ids_.find(symbol);
  return it == ids_.end() ? kUnknown : it->second;
}

std::vector<std::size_t> tokenize_selfies(std::string_view selfies,
                                          const SelfiesVocab& vocab) {
  std::vector<std::size_t> ids;
  for (const auto& sym : split_selfies(selfies)) ids.push_back(vocab.id(sym));
  return ids;
}

SelfiesVocab build_vocab(std::span<const std::string> corpus) {
  if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
  SelfiesVocab vocab;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    try {
      for (const auto& sym : split_selfies(corpus[k])) vocab.add(sym);
    } catch (const ParseError& e) {
      throw ParseError("sample " + std::to_string(k) + ": " + e.what(),
                       e.offset());
    }
  }
  return vocab;
}

SelfiesVocab build_vocab(std::span<const Molecule> corpus) {
  if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
  SelfiesVocab vocab;
  for (const auto& mol : corpus) {
    try {
      for (const auto& sym : split_selfies(mol.selfies)) vocab.add(sym);
    } catch (const ParseError& e) {
      throw ParseError("sample '" + mol.id + "': " + e.what(), e.offset());
    }
  }
  return vocab;
}

namespace {

// Index alphabet used after branch and ring symbols (base 16).
constexpr std::array<std::string_view, 16> kIndexSymbols = {
    "[C]",       "[Ring1]",   "[Ring2]", "[Branch1]", "[=Branch1]", "[#Branch1]",
    "[Branch2]", "[=Branch2]", "[#Branch2]", "[O]",   "[N]",        "[=N]",
    "[=C]",      "[#C]",      "[S]",     "[P]"};

std::vector<std::string> index_symbols(std::size_t value, std::size_t digits) {
  std::vector<std::string> out(digits);
  for (std::size_t d = digits; d-- > 0;) {
    out[d] = std::string(kIndexSymbols[value % 16]);
    value /= 16;
  }
  return out;
}

std::string bond_prefix(int order) {
  switch (order) {
    case 2: return "=";
    case 3: return "#";
    default: return "";
  }
}

}  // namespace

std::string write_selfies(const Molecule& mol) {
  const std::size_t n = mol.atom_count();
  std::vector<std::vector<std::pair<std::size_t, int>>> adj(n);
  for (const Bond& b : mol.bonds) {
    adj[b.i].emplace_back(b.j, b.order);
    adj[b.j].emplace_back(b.i, b.order);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> position(n, kNone);
  std::size_t next_position = 0;

  std::function<std::vector<std::string>(std::size_t, std::size_t, int)> visit =
      [&](std::size_t atom, std::size_t parent, int order) {
        std::vector<std::string> out;
        position[atom] = next_position++;
        out.push_back("[" + bond_prefix(order) + mol.atoms[atom] + "]");
        for (auto [other, bond_order] : adj[atom]) {
          if (other == parent || position[other] == kNone) continue;
          const std::size_t q = position[atom] - position[other] - 1;
          out.push_back("[" + bond_prefix(bond_order) + "Ring1]");
          for (auto& s : index_symbols(q, 1 + (q >= 16) + (q >= 256)))
            out.push_back(std::move(s));
        }
        std::vector<std::vector<std::string>> children;
        for (auto [other, bond_order] : adj[atom]) {
          if (position[other] != kNone) continue;
          children.push_back(visit(other, atom, bond_order));
        }
        for (std::size_t c = 0; c < children.size(); ++c) {
          auto& sub = children[c];
          if (c + 1 < children.size()) {
            const std::size_t q = sub.size() - 1;
            const std::size_t digits = q < 16 ? 1 : (q < 256 ? 2 : 3);
            out.push_back("[Branch" + std::to_string(digits) + "]");
            for (auto& s : index_symbols(q, digits)) out.push_back(std::move(s));
          }
          for (auto& s : sub) out.push_back(std::move(s));
        }
        return out;
      };

  std::vector<std::string> symbols;
  for (std::size_t start = 0; start < n; ++start) {
    if (position[start] != kNone) continue;
    if (!symbols.empty()) symbols.emplace_back("[.]");
    for (auto& s : visit(start, kNone, 1)) symbols.push_back(std::move(s));
  }
  return join_selfies(symbols);
}

}  // namespace molproj
