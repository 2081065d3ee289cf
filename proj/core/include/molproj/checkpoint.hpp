// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint container.
//
//   "MOLPROJ\0"                  8-byte magic
//   u32 version                  kCheckpointVersion
//   u64 n, n bytes               metadata JSON (config text, stage, vocabularies)
//   u32 count                    tensor manifest entries
//     u32 n, n bytes             name
//     u32 rank, rank x u64       shape
//     u8 dtype                   1 = little-endian IEEE-754 binary64
//   payloads                     tensors in manifest order, raw f64
//   u64 checksum                 FNV-1a over everything after the version
//
// All integers are little-endian. Nothing time-dependent is written, so
// saving the same model twice gives identical bytes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "molproj/config.hpp"
#include "molproj/model.hpp"

namespace molproj {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;  // RunConfig::to_text()
  int stage = 0;
  std::vector<std::string> selfies_symbols;
  std::vector<std::string> text_words;
  std::vector<NamedTensor> tensors;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError for a bad magic, version mismatch, truncation,
/// trailing bytes or checksum mismatch.
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter of the model, in store order.
Checkpoint snapshot(const MolecularAssistant& model, const RunConfig& config);

/// Overwrites the parameters of `model` with the checkpoint tensors. The
/// two name lists must match exactly; a shape difference is reported with
/// the tensor name.
void load_parameters(MolecularAssistant& model, const Checkpoint& ckpt);

/// Builds a model for `config` with the checkpoint's vocabularies, adds LoRA
/// adapters when the checkpoint has them, then loads the parameters.
MolecularAssistant restore_model(const Checkpoint& ckpt, const RunConfig& config);

}  // namespace molproj
