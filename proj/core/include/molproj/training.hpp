// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Two-stage training. Stage 1 aligns encoders and projector with a frozen
// language model on captions; stage 2 trains the projector and LoRA
// adapters on a mix of instruction tasks with the encoders frozen.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "molproj/model.hpp"
#include "molproj/optim.hpp"

namespace molproj {

struct StepRecord {
  std::size_t step = 0;  // 1-based
  double loss = 0.0;     // mean batch loss before the update
  double lr = 0.0;
  /// How many batch examples had each modality active, indexed by Modality.
  std::array<std::size_t, 3> modality_counts{};
};

struct TrainOptions {
  std::size_t steps = 300;
  std::size_t batch_size = 8;
  AdamConfig adam;
  double p_drop = 0.15;
  std::uint64_t seed = 0;
  std::function<void(const StepRecord&)> on_step;
};

/// Text-only pretraining of the language model on every task, conditioned
/// on the embedded fact sheet instead of molecule tokens. Only "lm."
/// parameters change. Stands in for the pretrained language model that the
/// later stages keep frozen.
std::vector<StepRecord> pretrain_lm(MolecularAssistant& model,
                                    std::span<const Molecule> corpus,
                                    const TrainOptions& options);

/// Trains encoders and projector on captions with the language model frozen.
/// Throws ValidationError for an empty corpus.
std::vector<StepRecord> train_stage1(MolecularAssistant& model,
                                     std::span<const Molecule> corpus,
                                     const TrainOptions& options);

/// Trains projector and LoRA adapters on all tasks with encoders and base
/// language model frozen. Requires a model that completed stage 1.
std::vector<StepRecord> train_stage2(MolecularAssistant& model,
                                     std::span<const Molecule> corpus,
                                     const TrainOptions& options);

/// Mean per-example loss over every (molecule, task) pair.
double validation_loss(const MolecularAssistant& model, std::span<const Molecule> corpus,
                       std::span<const Task> tasks, const ModalityMask& mask = {});

/// "step,loss,lr,active_1d,active_2d,active_3d" rows.
void write_training_log(std::ostream& out, std::span<const StepRecord> records);

}  // namespace molproj
