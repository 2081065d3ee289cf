// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Full molecule-to-text model: encoders, projector and decoder sharing one
// parameter store, plus the synthetic instruction tasks it is trained on.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "molproj/coproj.hpp"
#include "molproj/encoders.hpp"
#include "molproj/lmstub.hpp"
#include "molproj/molecule.hpp"
#include "molproj/selfies.hpp"

namespace molproj {

struct ModelConfig {
  EncoderConfig encoder;
  ProjectorConfig projector;
  LmConfig lm;  // vocab_size is taken from the text vocabulary
  LoraConfig lora;
};

enum class Task { caption, atom_count, ring_count, mean_distance };

std::string task_name(Task t);
Task parse_task(const std::string& name);
/// Instruction text shown to the model for a task.
std::string task_instruction(Task t);
/// Reference answer; throws ValidationError if the molecule lacks the
/// caption or property the task needs.
std::string task_response(const Molecule& mol, Task t);
std::vector<Task> all_tasks();

struct Example {
  std::size_t molecule = 0;  // index into the corpus
  Task task = Task::caption;
  std::string instruction;
  std::string response;
};

/// Plain-text summary of a molecule used to condition the language model
/// during its text-only pretraining, e.g.
/// "atoms 5 bonds 5 rings 1 carbon 3 nitrogen 1 oxygen 1 sulfur 0 fluorine 0 double 0 distance 1.7".
std::string fact_sheet(const Molecule& mol);

/// One example per (molecule, task), molecule-major.
std::vector<Example> make_examples(std::span<const Molecule> corpus,
                                   std::span<const Task> tasks);

/// Specials, instruction and fact-sheet words, caption words of `corpus` in
/// first-seen order, integers 0..64 and one-decimal numbers 0.0..12.0.
TextVocab build_text_vocab(std::span<const Molecule> corpus);

class MolecularAssistant {
 public:
  /// Random initialization from Rng::stream(seed, "init").
  static MolecularAssistant create(const ModelConfig& cfg, SelfiesVocab selfies,
                                   TextVocab text, std::uint64_t seed);

  MolecularAssistant(MolecularAssistant&&) = default;
  MolecularAssistant& operator=(MolecularAssistant&&) = default;
  // Copies would alias the same parameter nodes.
  MolecularAssistant(const MolecularAssistant&) = delete;
  MolecularAssistant& operator=(const MolecularAssistant&) = delete;

  /// Adds LoRA adapters (init stream "lora"); no-op when already present.
  void enable_lora(std::uint64_t seed);

  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  const Encoders& encoders() const { return encoders_; }
  const Projector& projector() const { return projector_; }
  const DecoderLM& lm() const { return lm_; }
  const SelfiesVocab& selfies_vocab() const { return selfies_; }
  const TextVocab& text_vocab() const { return text_; }

  /// Number of completed training stages (0, 1 or 2).
  int stage() const { return stage_; }
  void set_stage(int stage) { stage_ = stage; }

  /// `requested` minus modalities the molecule cannot provide (3d without
  /// coordinates). Throws ModalityUnavailable if nothing is left.
  ModalityMask usable_mask(const Molecule& mol, const ModalityMask& requested) const;

  UnifiedMoleculeTokens molecule_tokens(const Molecule& mol,
                                        const ModalityMask& mask) const;
  /// <bos> + instruction words.
  std::vector<std::size_t> instruction_ids(const std::string& instruction) const;
  /// response words + <eos>.
  std::vector<std::size_t> response_ids(const std::string& response) const;

  /// Embedded fact sheet, truncated or padded with <pad> to b * L rows.
  Var fact_prefix(const Molecule& mol) const;

  Var loss(const Molecule& mol, const std::string& instruction,
           const std::string& response, const ModalityMask& mask) const;
  std::string answer(const Molecule& mol, const std::string& instruction,
                     const ModalityMask& mask, std::size_t max_len = 40) const;

 private:
  MolecularAssistant() = default;

  ModelConfig cfg_;
  SelfiesVocab selfies_;
  TextVocab text_;
  ParameterStore store_;
  Encoders encoders_;
  Projector projector_;
  DecoderLM lm_;
  int stage_ = 0;
};

}  // namespace molproj
