// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Lexical SELFIES handling. Strings are treated purely as sequences of
// bracketed symbols; chemical validity is never checked.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "molproj/molecule.hpp"

namespace molproj {

/// Splits "[C][=O][Branch1]" into {"[C]", "[=O]", "[Branch1]"}. Throws
/// ParseError with the byte offset of the first unbalanced or stray
/// character.
std::vector<std::string> split_selfies(std::string_view selfies);

std::string join_selfies(std::span<const std::string> symbols);

/// Dense symbol ids; 0 is padding and 1 stands for every unknown symbol.
class SelfiesVocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnknown = 1;
  static constexpr std::string_view kPadSymbol = "<pad>";
  static constexpr std::string_view kUnknownSymbol = "<unk>";

  SelfiesVocab();
  /// Specials first, then `symbols` in order (duplicates ignored).
  static SelfiesVocab from_symbols(std::span<const std::string> symbols);

  /// Adds `symbol` if new; returns its id.
  std::size_t add(const std::string& symbol);
  std::size_t id(const std::string& symbol) const;
  const std::string& symbol(std::size_t id) const { return symbols_.at(id); }
  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  friend bool operator==(const SelfiesVocab& a, const SelfiesVocab& b) {
    return a.symbols_ == b.symbols_;
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::size_t> ids_;
};

std::vector<std::size_t> tokenize_selfies(std::string_view selfies,
                                          const SelfiesVocab& vocab);

/// First-seen order over the corpus. A malformed string raises ParseError
/// whose message names the sample (its index for plain strings, its id for
/// molecules).
SelfiesVocab build_vocab(std::span<const std::string> corpus);
SelfiesVocab build_vocab(std::span<const Molecule> corpus);

/// Writes a SELFIES-style string for a molecule graph by depth-first
/// traversal from atom 0: branch and ring symbols followed by index symbols,
/// '=' / '#' prefixes for double and triple bonds.
std::string write_selfies(const Molecule& mol);

}  // namespace molproj
