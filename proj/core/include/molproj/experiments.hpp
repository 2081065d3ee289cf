// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Experiment drivers behind the command-line tool: data ingest, the two
// training stages, evaluation under a modality subset, component ablations
// and finite-difference gradient checks. Each driver is deterministic given
// its config and inputs.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "molproj/checkpoint.hpp"
#include "molproj/config.hpp"
#include "molproj/dataset.hpp"
#include "molproj/evalkit.hpp"
#include "molproj/model.hpp"
#include "molproj/optim.hpp"
#include "molproj/training.hpp"

namespace molproj {

// -- data --------------------------------------------------------------------

struct Corpus {
  std::vector<Molecule> train;
  std::vector<Molecule> val;
};

/// Reads config.train_path / val_path, or when train_path is empty generates
/// train_count + val_count synthetic molecules from data_seed and splits
/// them in order.
Corpus load_corpus(const RunConfig& config);

/// Fresh model with SELFIES and text vocabularies built from the training
/// split, initialized from config.seed.
MolecularAssistant build_model(const RunConfig& config, std::span<const Molecule> train);

/// Tab-separated gazetteer for the synthetic captions: "<k> <element> atoms"
/// counted terms, bare element names, ring and bond phrases, and a few
/// low-confidence generic words.
std::string default_gazetteer_text();
/// config.gazetteer_path when set, otherwise the default gazetteer.
EntityGazetteer load_gazetteer(const RunConfig& config);

struct IngestOptions {
  std::string format = "jsonl";
  bool skip_invalid = false;
  std::optional<std::filesystem::path> xyz;
};

struct IngestResult {
  std::size_t written = 0;
  std::size_t merged = 0;  // records that received XYZ coordinates
  std::vector<LoadIssue> rejected;
};

IngestResult run_ingest(const std::filesystem::path& input,
                        const std::filesystem::path& output, const IngestOptions& options);

// -- training ----------------------------------------------------------------

TrainOptions train_options(const RunConfig& config, std::size_t steps, double lr,
                           double p_drop);

struct StageOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::vector<StepRecord> records;
};

/// Language-model pretraining followed by stage 1. Writes stage1.ckpt,
/// stage1_log.csv and pretrain_log.csv into `dir` (config.checkpoint_dir when
/// empty). The output location is not part of the checkpoint.
StageOutputs run_stage1(const RunConfig& config, const Corpus& corpus,
                        const std::filesystem::path& dir = {});

/// Stage 2 from a stage-1 checkpoint. Writes stage2.ckpt and stage2_log.csv
/// into `dir` (config.checkpoint_dir when empty). Throws ValidationError when
/// the checkpoint has not completed stage 1.
StageOutputs run_stage2(const RunConfig& config, const Corpus& corpus,
                        const std::filesystem::path& from,
                        const std::filesystem::path& dir = {});

// -- evaluation --------------------------------------------------------------

/// caption: generated descriptions scored with entity ratios, BLEU and the
/// judge. count: atom and ring counts. qa: mean interatomic distance. The
/// last two are scored for validity and absolute error.
enum class EvalTask { caption, qa, count };

std::string eval_task_name(EvalTask t);
/// Throws ConfigError for unknown names.
EvalTask parse_eval_task(const std::string& name);
std::vector<Task> eval_task_members(EvalTask t);

struct EvalRequest {
  EvalTask task = EvalTask::caption;
  ModalityMask mask;
  EvalOptions options;
  std::size_t max_len = 40;
};

struct EvalOutputs {
  std::vector<TextRecord> predictions;
  std::vector<TextRecord> references;
  EvalReport report;
};

/// Predictions use ids "<molecule id>" for captions and
/// "<molecule id>:<task>" for numeric tasks.
EvalOutputs run_eval(const MolecularAssistant& model, std::span<const Molecule> molecules,
                     const EntityGazetteer& gazetteer, const EvalRequest& request,
                     JudgeTransport* transport = nullptr);

/// Writes <stem>.predictions.jsonl, <stem>.references.jsonl, <stem>.json and
/// <stem>.txt inside `dir`; returns the JSON report path.
std::filesystem::path write_eval_outputs(const std::filesystem::path& dir,
                                         const std::string& stem, const EvalOutputs& out);

// -- ablation ----------------------------------------------------------------

/// co_attention, modality_embedding, modality_dropout.
const std::vector<std::string>& ablation_components();

/// `config` with one component disabled. Throws ConfigError for unknown
/// names.
RunConfig ablated_config(const RunConfig& config, const std::string& component);

struct AblationRow {
  std::string variant;  // "full" or the disabled component
  RunConfig config;
  std::vector<StepRecord> stage1;
  double caption_val_loss = 0.0;        // all modalities
  std::array<double, 3> single_val_loss{};  // caption loss with one modality
};

struct AblationReport {
  std::vector<AblationRow> rows;  // full model first
};

/// Pretrains and trains stage 1 for the full model and each variant, then
/// scores caption validation loss. Throws ConfigError for unknown or
/// repeated component names.
AblationReport run_ablation(const RunConfig& config, const Corpus& corpus,
                            std::span<const std::string> components,
                            const std::function<void(const AblationRow&)>& on_row = {});

void write_ablation_json(std::ostream& out, const AblationReport& report);
void write_ablation_text(std::ostream& out, const AblationReport& report);

// -- gradient check ----------------------------------------------------------

/// Four atoms (C, C, O, N) in a chain with a ring closure and fixed
/// coordinates; every modality is available.
Molecule gradcheck_molecule();

struct GradcheckRequest {
  /// "coproj", "lmstub", "encoders" or "all".
  std::string module = "all";
  double tolerance = 1e-4;
  GradcheckOptions options = {1e-3, 16, 0, true, 1e-6};
  /// Added to the caption loss; used to inject a faulty operation.
  std::function<Var(const MolecularAssistant&)> extra_term;
};

struct GradcheckResult {
  std::vector<GradReport> reports;
  std::size_t parameters_checked = 0;
  std::size_t parameters_total = 0;  // trainable parameters of the model
  std::size_t elements_checked = 0;
  GradReport worst;
  bool passed = false;
};

/// Builds a model from `config` with LoRA adapters whose B factors are
/// randomized (so every adapter has a nonzero gradient), then checks the
/// caption loss of gradcheck_molecule() with all modalities against central
/// differences over the selected parameters.
GradcheckResult run_gradcheck(const RunConfig& config, const Corpus& corpus,
                              const GradcheckRequest& request);

}  // namespace molproj
