// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/model.hpp"

#include <algorithm>
#include <cstdio>

#include "molproj/errors.hpp"
#include "molproj/random.hpp"
#include "molproj/synthetic.hpp"

namespace molproj {

namespace {

constexpr int kMaxIntegerToken = 64;
constexpr int kMaxDecimalTenths = 120;

std::string one_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::string task_name(Task t) {
  switch (t) {
    case Task::caption: return "caption";
    case Task::atom_count: return "atom_count";
    case Task::ring_count: return "ring_count";
    case Task::mean_distance: return "mean_distance";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  for (Task t : all_tasks())
    if (task_name(t) == name) return t;
  throw ConfigError("unknown task '" + name + "'");
}

std::vector<Task> all_tasks() {
  return {Task::caption, Task::atom_count, Task::ring_count, Task::mean_distance};
}

std::string task_instruction(Task t) {
  switch (t) {
    case Task::caption: return "describe this molecule .";
    case Task::atom_count: return "how many atoms does this molecule have ?";
    case Task::ring_count: return "how many rings does this molecule have ?";
    case Task::mean_distance: return "what is the mean distance between its atoms ?";
  }
  return {};
}

std::string task_response(const Molecule& mol, Task t) {
  switch (t) {
    case Task::caption:
      if (!mol.caption) throw ValidationError("molecule '" + mol.id + "' has no caption");
      return *mol.caption;
    case Task::atom_count:
      return std::to_string(mol.atom_count());
    case Task::ring_count:
      return std::to_string(ring_count(mol));
    case Task::mean_distance: {
      auto it = mol.properties.find("mean_distance");
      if (it == mol.properties.end()) {
        throw ValidationError("molecule '" + mol.id + "' has no mean_distance property");
      }
      return one_decimal(it->second);
    }
  }
  return {};
}

std::string fact_sheet(const Molecule& mol) {
  std::string text = "atoms " + std::to_string(mol.atom_count()) + " bonds " +
                     std::to_string(mol.bonds.size()) + " rings " +
                     std::to_string(ring_count(mol));
  for (const auto& [symbol, name] : caption_elements()) {
    text += " " + name + " " +
            std::to_string(std::count(mol.atoms.begin(), mol.atoms.end(), symbol));
  }
  const auto doubles = std::count_if(mol.bonds.begin(), mol.bonds.end(),
                                     [](const Bond& b) { return b.order == 2; });
  text += " double " + std::to_string(doubles);
  if (auto it = mol.properties.find("mean_distance"); it != mol.properties.end()) {
    text += " distance " + one_decimal(it->second);
  }
  return text;
}

std::vector<Example> make_examples(std::span<const Molecule> corpus,
                                   std::span<const Task> tasks) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    for (Task t : tasks)
      out.push_back({i, t, task_instruction(t), task_response(corpus[i], t)});
  return out;
}

TextVocab build_text_vocab(std::span<const Molecule> corpus) {
  TextVocab v;
  for (Task t : all_tasks())
    for (const auto& w : whitespace_tokens(task_instruction(t))) v.add(w);
  for (const char* w : {"atoms", "bonds", "rings", "double", "distance"}) v.add(w);
  for (const auto& [symbol, name] : caption_elements()) v.add(name);
  for (const auto& mol : corpus)
    if (mol.caption)
      for (const auto& w : whitespace_tokens(*mol.caption)) v.add(w);
  for (int i = 0; i <= kMaxIntegerToken; ++i) v.add(std::to_string(i));
  for (int i = 0; i <= kMaxDecimalTenths; ++i) v.add(one_decimal(i / 10.0));
  return v;
}

MolecularAssistant MolecularAssistant::create(const ModelConfig& cfg, SelfiesVocab selfies,
                                              TextVocab text, std::uint64_t seed) {
  const auto& e = cfg.encoder;
  const auto& p = cfg.projector;
  if (p.layers != e.layers || p.d1 != e.d1 || p.d2 != e.d2 || p.d3 != e.d3) {
    throw ConfigError("projector layer count and input widths must match the encoders");
  }
  if (p.d != cfg.lm.width) {
    throw ConfigError("projector width " + std::to_string(p.d) +
                      " must equal the language model width " + std::to_string(cfg.lm.width));
  }
  if (p.query_tokens * p.layers >= cfg.lm.max_seq) {
    throw ConfigError("molecule tokens leave no room in the language model sequence");
  }
  MolecularAssistant m;
  m.cfg_ = cfg;
  m.cfg_.lm.vocab_size = text.size();
  m.selfies_ = std::move(selfies);
  m.text_ = std::move(text);
  Rng rng = Rng::stream(seed, "init");
  m.encoders_ = Encoders::create(m.store_, e, m.selfies_.size(), rng);
  m.projector_ = Projector::create(m.store_, p, rng);
  m.lm_ = DecoderLM::create(m.store_, m.cfg_.lm, rng);
  return m;
}

void MolecularAssistant::enable_lora(std::uint64_t seed) {
  if (lm_.has_lora()) return;
  Rng rng = Rng::stream(seed, "lora");
  lm_.apply_lora(store_, cfg_.lora, rng);
}

ModalityMask MolecularAssistant::usable_mask(const Molecule& mol,
                                             const ModalityMask& requested) const {
  if (mol.has_coords() || !requested.contains(Modality::three_d)) return requested;
  if (requested.count() == 1) {
    throw ModalityUnavailable("molecule '" + mol.id +
                              "' has no coordinates and 3d is the only requested modality");
  }
  return requested.without(Modality::three_d);
}

UnifiedMoleculeTokens MolecularAssistant::molecule_tokens(const Molecule& mol,
                                                          const ModalityMask& requested) const {
  const ModalityMask mask = usable_mask(mol, requested);
  const StructMatrices sm = struct_matrices(mol);
  ProjectorInputs in;
  in.spd = &sm.spd;
  if (sm.dist) in.dist = &*sm.dist;
  if (mask.contains(Modality::one_d)) {
    const auto ids = tokenize_selfies(mol.selfies, selfies_);
    in.one_d = encoders_.one_d.embed(ids);
  }
  if (mask.contains(Modality::two_d)) in.two_d = encoders_.two_d.encode(mol);
  if (mask.contains(Modality::three_d)) {
    in.three_d = encoders_.three_d.encode_distances(mol, *sm.dist);
  }
  return projector_.forward(in, mask);
}

std::vector<std::size_t> MolecularAssistant::instruction_ids(
    const std::string& instruction) const {
  std::vector<std::size_t> ids{TextVocab::kBos};
  for (std::size_t id : text_.encode(instruction)) ids.push_back(id);
  return ids;
}

std::vector<std::size_t> MolecularAssistant::response_ids(const std::string& response) const {
  std::vector<std::size_t> ids = text_.encode(response);
  ids.push_back(TextVocab::kEos);
  return ids;
}

Var MolecularAssistant::fact_prefix(const Molecule& mol) const {
  const std::size_t rows = cfg_.projector.query_tokens * cfg_.projector.layers;
  std::vector<std::size_t> ids = text_.encode(fact_sheet(mol));
  ids.resize(rows, TextVocab::kPad);
  return lm_.embed(ids);
}

Var MolecularAssistant::loss(const Molecule& mol, const std::string& instruction,
                             const std::string& response, const ModalityMask& mask) const {
  const auto tokens = molecule_tokens(mol, mask);
  return lm_.forward_loss(tokens.tokens, instruction_ids(instruction), response_ids(response));
}

std::string MolecularAssistant::answer(const Molecule& mol, const std::string& instruction,
                                       const ModalityMask& mask, std::size_t max_len) const {
  const auto tokens = molecule_tokens(mol, mask);
  return text_.decode(lm_.generate(tokens.tokens, instruction_ids(instruction), max_len));
}

}  // namespace molproj
