// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Run configuration: a flat "key = value" text file with typed fields.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "molproj/coproj.hpp"
#include "molproj/model.hpp"
#include "molproj/optim.hpp"

namespace molproj {

struct RunConfig {
  std::uint64_t seed = 0;

  // encoders
  std::size_t enc_layers = 3;
  std::size_t d1 = 32, d2 = 32, d3 = 32;
  double tau = 4.0;

  // projector
  std::size_t d = 64;
  std::size_t query_tokens = 8;
  std::size_t heads = 4;
  std::size_t kernels = 16;
  std::size_t spd_max = 8;
  double p_drop = 0.15;
  bool co_attention = true;
  bool modality_embedding = true;

  // language model
  std::size_t lm_blocks = 2;
  std::size_t lm_heads = 4;
  std::size_t lm_max_seq = 128;
  std::size_t lora_rank = 4;
  double lora_alpha = 8.0;
  std::vector<std::string> lora_targets = {"wq", "wv"};

  // optimization
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::size_t batch_size = 8;
  std::size_t pretrain_steps = 400;
  double pretrain_lr = 3e-3;
  std::size_t steps = 300;
  std::size_t stage2_steps = 300;

  // data
  std::string train_path;  // empty: generate the synthetic corpus
  std::string val_path;
  std::uint64_t data_seed = 0;
  std::size_t train_count = 64;
  std::size_t val_count = 16;
  std::size_t max_atoms = 10;
  std::string gazetteer_path;

  // outputs
  std::string checkpoint_dir = "runs";
  std::string report_dir = "reports";

  std::string modalities = "1d,2d,3d";

  /// Throws ConfigError naming the line for syntax errors, unknown or
  /// repeated keys and type errors; then validates.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// Every key in a fixed order; parse(to_text()) reproduces the config.
  std::string to_text() const;

  /// Positive dimensions, p_drop in [0, 1), divisibility of widths by heads.
  void validate() const;

  ModelConfig model_config() const;
  AdamConfig adam() const;
  ModalityMask modality_mask() const { return ModalityMask::parse(modalities); }
};

}  // namespace molproj
