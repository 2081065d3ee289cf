// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/lmstub.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "molproj/errors.hpp"

namespace molproj {

// ---------------------------------------------------------------------------
// TextVocab

TextVocab::TextVocab() {
  for (const char* w : {"<pad>", "<unk>", "<bos>", "<eos>"}) add(w);
}

TextVocab TextVocab::from_words(std::span<const std::string> words) {
  TextVocab v;
  v.words_.clear();
  v.index_.clear();
  for (const auto& w : words) {
    if (v.contains(w)) throw ConfigError("duplicate vocabulary word '" + w + "'");
    v.add(w);
  }
  if (v.size() < 4 || v.words_[kPad] != "<pad>" || v.words_[kUnknown] != "<unk>" ||
      v.words_[kBos] != "<bos>" || v.words_[kEos] != "<eos>") {
    throw ConfigError("text vocabulary must start with <pad> <unk> <bos> <eos>");
  }
  return v;
}

std::size_t TextVocab::add(const std::string& word) {
  if (auto it = index_.find(word); it != index_.end()) return it->second;
  index_.emplace(word, words_.size());
  words_.push_back(word);
  return words_.size() - 1;
}

std::size_t TextVocab::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnknown : it->second;
}

bool TextVocab::contains(std::string_view word) const {
  return index_.count(std::string(word)) > 0;
}

const std::string& TextVocab::word(std::size_t id) const {
  if (id >= words_.size()) {
    throw ShapeError("text id " + std::to_string(id) + " out of range");
  }
  return words_[id];
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream in(lowered);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::vector<std::size_t> TextVocab::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const auto& w : whitespace_tokens(text)) ids.push_back(id(w));
  return ids;
}

std::string TextVocab::decode(std::span<const std::size_t> ids) const {
  std::string out;
  for (std::size_t id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (!out.empty()) out += ' ';
    out += word(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DecoderLM

DecoderLM DecoderLM::create(ParameterStore& store, const LmConfig& cfg, Rng& rng) {
  if (cfg.vocab_size < 4 || cfg.width == 0 || cfg.blocks == 0 || cfg.heads == 0 ||
      cfg.max_seq == 0 || cfg.mlp_ratio == 0) {
    throw ConfigError("language model sizes must be positive (vocabulary >= 4)");
  }
  if (cfg.width % cfg.heads != 0) {
    throw ConfigError("lm width " + std::to_string(cfg.width) + " not divisible by " +
                      std::to_string(cfg.heads) + " heads");
  }
  DecoderLM lm;
  lm.cfg_ = cfg;
  const std::size_t d = cfg.width;
  lm.tok_emb_ = store.add("lm.tok_emb", normal_tensor({cfg.vocab_size, d}, 1.0, rng));
  lm.pos_emb_ = store.add("lm.pos_emb", normal_tensor({cfg.max_seq, d}, 0.2, rng));
  auto ones = [d] {
    Tensor t({d});
    for (auto& v : t.data()) v = 1.0;
    return t;
  };
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    const std::string name = "lm.block" + std::to_string(i);
    Block b;
    b.ln1_gain = store.add(name + ".ln1.gain", ones());
    b.ln1_bias = store.add(name + ".ln1.bias", Tensor({d}));
    b.attn = AttentionWeights::create(store, name + ".attn", d, rng);
    b.ln2_gain = store.add(name + ".ln2.gain", ones());
    b.ln2_bias = store.add(name + ".ln2.bias", Tensor({d}));
    b.fc1 = Linear::create(store, name + ".fc1", d, d * cfg.mlp_ratio, rng);
    b.fc2 = Linear::create(store, name + ".fc2", d * cfg.mlp_ratio, d, rng);
    lm.blocks_.push_back(std::move(b));
  }
  lm.lnf_gain_ = store.add("lm.lnf.gain", ones());
  lm.lnf_bias_ = store.add("lm.lnf.bias", Tensor({d}));
  lm.head_ = Linear::create(store, "lm.head", d, cfg.vocab_size, rng);
  return lm;
}

std::vector<std::string> DecoderLM::attention_weight_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    for (const char* w : {"wq", "wk", "wv", "wo"})
      out.push_back("lm.block" + std::to_string(i) + ".attn." + w);
  return out;
}

void DecoderLM::apply_lora(ParameterStore& store, const LoraConfig& lora, Rng& rng) {
  if (lora.rank == 0) throw ConfigError("lora rank must be positive");
  const auto known = attention_weight_names();
  std::vector<std::string> names;
  for (const auto& target : lora.targets) {
    bool matched = false;
    for (const auto& full : known) {
      const auto dot = full.rfind('.');
      if (full == target || full.substr(dot + 1) == target) {
        names.push_back(full);
        matched = true;
      }
    }
    if (!matched) throw ConfigError("unknown lora target '" + target + "'");
  }
  for (const auto& name : names) {
    const bool exists = std::any_of(adapters_.begin(), adapters_.end(),
                                    [&](const LoraAdapter& a) { return a.target == name; });
    if (exists) throw ConfigError("weight '" + name + "' already has a lora adapter");
    // Copy the shape: store.add() may reallocate the parameter list.
    const std::size_t rows = store.get(name).var.rows(), cols = store.get(name).var.cols();
    const std::string base = "lora" + name.substr(2);  // "lm.x" -> "lora.x"
    LoraAdapter a;
    a.target = name;
    a.a = store.add(base + ".a", xavier_uniform(rows, lora.rank, rng));
    a.b = store.add(base + ".b", Tensor({lora.rank, cols}));
    a.scaling = lora.alpha / static_cast<double>(lora.rank);
    adapters_.push_back(std::move(a));
  }
}

Var DecoderLM::effective(const Var& weight, const std::string& name) const {
  for (const auto& a : adapters_)
    if (a.target == name) return add(weight, scale(matmul(a.a, a.b), a.scaling));
  return weight;
}

Var DecoderLM::embed(std::span<const std::size_t> ids) const {
  const std::size_t d = cfg_.width;
  std::vector<std::size_t> idx;
  idx.reserve(ids.size() * d);
  for (std::size_t id : ids) {
    if (id >= cfg_.vocab_size) {
      throw ShapeError("text id " + std::to_string(id) + " out of range");
    }
    for (std::size_t c = 0; c < d; ++c) idx.push_back(id * d + c);
  }
  return take(tok_emb_, std::move(idx), {ids.size(), d});
}

Var DecoderLM::logits(const Var& prefix, std::span<const std::size_t> ids) const {
  const std::size_t d = cfg_.width;
  const std::size_t p = prefix ? prefix.rows() : 0;
  const std::size_t t = p + ids.size();
  if (prefix && prefix.cols() != d) {
    throw ShapeError("prefix width " + std::to_string(prefix.cols()) +
                     " differs from model width " + std::to_string(d));
  }
  if (t > cfg_.max_seq) {
    throw ShapeError("sequence of " + std::to_string(t) + " positions exceeds max length " +
                     std::to_string(cfg_.max_seq));
  }
  if (t == 0) throw ShapeError("empty input sequence");

  std::vector<Var> parts;
  if (p > 0) parts.push_back(prefix);
  if (!ids.empty()) parts.push_back(embed(ids));
  Var x = parts.size() == 1 ? parts.front() : concat_rows(parts);
  x = add(x, slice_rows(pos_emb_, 0, t));

  AttentionOptions opts;
  opts.heads = cfg_.heads;
  opts.causal = true;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    const std::string name = "lm.block" + std::to_string(i) + ".attn.";
    AttentionWeights w{effective(b.attn.wq, name + "wq"), effective(b.attn.wk, name + "wk"),
                       effective(b.attn.wv, name + "wv"), effective(b.attn.wo, name + "wo")};
    Var h = layer_norm_rows(x, b.ln1_gain, b.ln1_bias);
    x = add(x, biased_attention(h, h, h, Var{}, w, opts));
    h = layer_norm_rows(x, b.ln2_gain, b.ln2_bias);
    x = add(x, b.fc2(gelu(b.fc1(h))));
  }
  return head_(layer_norm_rows(x, lnf_gain_, lnf_bias_));
}

Var DecoderLM::forward_loss(const Var& prefix, std::span<const std::size_t> instruction,
                            std::span<const std::size_t> response) const {
  if (response.empty()) throw ShapeError("forward_loss: empty response");
  const std::size_t p = prefix ? prefix.rows() : 0;
  const std::size_t total = p + instruction.size() + response.size();
  if (total > cfg_.max_seq) {
    throw ShapeError("sequence of " + std::to_string(total) +
                     " positions exceeds max length " + std::to_string(cfg_.max_seq));
  }
  const std::size_t context = p + instruction.size();
  if (context == 0) throw ShapeError("forward_loss: nothing to condition the first response token on");
  // The last response token is only ever a target, never an input.
  std::vector<std::size_t> ids(instruction.begin(), instruction.end());
  ids.insert(ids.end(), response.begin(), response.end() - 1);
  Var out = logits(prefix, ids);
  std::vector<std::size_t> rows(response.size());
  for (std::size_t k = 0; k < response.size(); ++k) rows[k] = context + k - 1;
  return cross_entropy(out, rows, response);
}

std::vector<std::size_t> DecoderLM::generate(const Var& prefix,
                                             std::span<const std::size_t> instruction,
                                             std::size_t max_len) const {
  std::vector<std::size_t> ids(instruction.begin(), instruction.end());
  std::vector<std::size_t> out;
  const std::size_t p = prefix ? prefix.rows() : 0;
  while (out.size() < max_len && p + ids.size() <= cfg_.max_seq) {
    const Var l = logits(prefix, ids);
    const std::size_t last = l.rows() - 1;
    std::size_t best = 0;
    for (std::size_t j = 1; j < l.cols(); ++j)
      if (l.value()(last, j) > l.value()(last, best)) best = j;
    if (best == TextVocab::kEos) break;
    out.push_back(best);
    ids.push_back(best);
  }
  return out;
}

}  // namespace molproj
