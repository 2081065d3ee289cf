// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Tiny pre-LN decoder language model conditioned on a soft prefix of
// molecule tokens, with optional low-rank adapters on attention weights.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "molproj/nn.hpp"

namespace molproj {

/// Word-level vocabulary. Ids 0..3 are reserved for <pad>, <unk>, <bos>,
/// <eos>; other words get dense ids in insertion order.
class TextVocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnknown = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;

  TextVocab();
  static TextVocab from_words(std::span<const std::string> words);

  /// Adds `word` if missing; returns its id.
  std::size_t add(const std::string& word);
  std::size_t id(std::string_view word) const;  // kUnknown when absent
  bool contains(std::string_view word) const;
  const std::string& word(std::size_t id) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  /// Lowercases and splits on whitespace.
  std::vector<std::size_t> encode(std::string_view text) const;
  /// Joins words with single spaces, skipping specials.
  std::string decode(std::span<const std::size_t> ids) const;

  bool operator==(const TextVocab& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<std::string> whitespace_tokens(std::string_view text);

struct LmConfig {
  std::size_t vocab_size = 0;
  std::size_t width = 64;
  std::size_t blocks = 2;
  std::size_t heads = 4;
  std::size_t max_seq = 128;
  std::size_t mlp_ratio = 4;
};

struct LoraConfig {
  std::size_t rank = 4;
  double alpha = 8.0;
  /// Short names ("wq", "wk", "wv", "wo") expand to every block; full
  /// parameter names ("lm.block0.attn.wq") select one weight.
  std::vector<std::string> targets = {"wq", "wv"};
};

/// Low-rank update for one weight: W + (alpha / r) A B.
struct LoraAdapter {
  std::string target;
  Var a;  // in x r
  Var b;  // r x out, zero at creation
  double scaling = 0.0;
};

class DecoderLM {
 public:
  /// Parameters live under "lm."; adapters under "lora.".
  static DecoderLM create(ParameterStore& store, const LmConfig& cfg, Rng& rng);

  const LmConfig& config() const { return cfg_; }

  /// Adds adapters on the named targets. Throws ConfigError for unknown
  /// targets, zero rank or an already adapted weight.
  void apply_lora(ParameterStore& store, const LoraConfig& lora, Rng& rng);
  bool has_lora() const { return !adapters_.empty(); }
  const std::vector<LoraAdapter>& adapters() const { return adapters_; }

  /// Logits for every position of [prefix rows] ++ [embeddings of ids].
  /// Throws ShapeError when the sequence exceeds max_seq or the prefix
  /// width differs from the model width.
  Var logits(const Var& prefix, std::span<const std::size_t> ids) const;

  /// Mean negative log-likelihood of `response` given the prefix and the
  /// instruction; prefix and instruction positions carry no loss.
  Var forward_loss(const Var& prefix, std::span<const std::size_t> instruction,
                   std::span<const std::size_t> response) const;

  /// Greedy decoding; stops after emitting EOS (not returned) or max_len ids.
  std::vector<std::size_t> generate(const Var& prefix,
                                    std::span<const std::size_t> instruction,
                                    std::size_t max_len) const;

  /// Token embedding rows for `ids` (ids x width).
  Var embed(std::span<const std::size_t> ids) const;

  /// Names of every weight a short LoRA target may expand to.
  std::vector<std::string> attention_weight_names() const;

 private:
  struct Block {
    Var ln1_gain, ln1_bias;
    AttentionWeights attn;
    Var ln2_gain, ln2_bias;
    Linear fc1, fc2;
  };

  Var effective(const Var& weight, const std::string& name) const;

  LmConfig cfg_;
  Var tok_emb_, pos_emb_;
  std::vector<Block> blocks_;
  Var lnf_gain_, lnf_bias_;
  Linear head_;
  std::vector<LoraAdapter> adapters_;
};

}  // namespace molproj
