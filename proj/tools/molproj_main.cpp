// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// molproj: data ingest, training, evaluation, ablation and gradient checks.
//
// Exit codes: 0 success, 1 usage or config error, 2 validation error,
// 3 gradient check failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "molproj/errors.hpp"
#include "molproj/experiments.hpp"
#include "molproj/synthetic.hpp"

namespace fs = std::filesystem;
using namespace molproj;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitGradcheck = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : RunConfig::load(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "Run config file (key = value)");
  cmd->add_option("--seed", c.seed, "Override the config seed");
}

int cmd_synth(std::uint64_t seed, std::size_t count, std::size_t max_atoms,
              const std::string& out) {
  const auto mols = generate_synthetic(seed, count, max_atoms);
  save_dataset(out, mols);
  std::printf("wrote %zu molecules to %s\n", mols.size(), out.c_str());
  return 0;
}

int cmd_ingest(const std::string& input, const std::string& output, const IngestOptions& opts) {
  const auto r = run_ingest(input, output, opts);
  std::printf("records %zu rejected %zu", r.written, r.rejected.size());
  if (opts.xyz) std::printf(" coords_merged %zu", r.merged);
  std::printf("\n");
  return 0;
}

int cmd_train(const Common& common, int stage, const std::string& from,
              const std::string& out_dir) {
  const RunConfig cfg = load_config(common);
  const Corpus corpus = load_corpus(cfg);
  StageOutputs out;
  if (stage == 1) {
    out = run_stage1(cfg, corpus, out_dir);
  } else {
    if (from.empty()) {
      std::fprintf(stderr, "error: --stage 2 requires --from <stage-1 checkpoint>\n");
      return kExitUsage;
    }
    out = run_stage2(cfg, corpus, from, out_dir);
  }
  std::printf("stage %d: %zu steps, loss %.4f -> %.4f\n", stage, out.records.size(),
              out.records.empty() ? 0.0 : out.records.front().loss,
              out.records.empty() ? 0.0 : out.records.back().loss);
  std::printf("checkpoint %s\nlog %s\n", out.checkpoint.string().c_str(),
              out.log.string().c_str());
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string task = "caption";
  std::string data;
  std::string modalities = "all";
  std::string out_dir;
  std::string stem;
  bool stub_judge = false;
  std::string judge_endpoint;
  std::size_t max_len = 40;
};

int cmd_eval(const Common& common, const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  RunConfig cfg = common.config_path.empty() ? RunConfig::parse(ckpt.config_text)
                                             : RunConfig::load(common.config_path);
  if (common.seed) cfg.seed = *common.seed;
  const auto model = restore_model(ckpt, cfg);

  std::vector<Molecule> molecules;
  if (!a.data.empty()) {
    molecules = load_dataset(a.data).molecules;
  } else {
    molecules = load_corpus(cfg).val;
  }

  EvalRequest req;
  req.task = parse_eval_task(a.task);
  req.mask = ModalityMask::parse(a.modalities);
  req.max_len = a.max_len;
  req.options.judge = a.stub_judge || !a.judge_endpoint.empty();
  req.options.judge_config.stub = a.stub_judge;
  req.options.judge_config.endpoint = a.judge_endpoint;
  req.options.metadata["checkpoint"] = fs::path(a.checkpoint).filename().string();
  req.options.metadata["data"] = a.data.empty() ? "config validation split" : a.data;

  std::unique_ptr<JudgeTransport> transport;
  if (req.options.judge && !a.stub_judge) {
    transport = std::make_unique<HttpJudgeTransport>(req.options.judge_config);
  }
  const auto out = run_eval(model, molecules, load_gazetteer(cfg), req, transport.get());

  std::string stem = a.stem;
  if (stem.empty()) {
    stem = a.task + "_" + req.mask.to_string();
    for (auto& ch : stem)
      if (ch == ',') ch = '+';
  }
  const fs::path dir = a.out_dir.empty() ? fs::path(cfg.report_dir) : fs::path(a.out_dir);
  const auto path = write_eval_outputs(dir, stem, out);
  write_report_text(std::cout, out.report);
  std::printf("report %s\n", path.string().c_str());
  return 0;
}

int cmd_ablate(const Common& common, std::vector<std::string> components,
               const std::string& out_dir) {
  const RunConfig cfg = load_config(common);
  if (components.empty()) components = ablation_components();
  const Corpus corpus = load_corpus(cfg);
  const auto report = run_ablation(cfg, corpus, components, [](const AblationRow& r) {
    std::printf("%-20s val %.4f\n", r.variant.c_str(), r.caption_val_loss);
    std::fflush(stdout);
  });
  const fs::path dir = out_dir.empty() ? fs::path(cfg.report_dir) : fs::path(out_dir);
  fs::create_directories(dir);
  {
    std::ofstream json(dir / "ablation.json", std::ios::binary | std::ios::trunc);
    write_ablation_json(json, report);
    std::ofstream text(dir / "ablation.txt", std::ios::binary | std::ios::trunc);
    write_ablation_text(text, report);
  }
  write_ablation_text(std::cout, report);
  std::printf("report %s\n", (dir / "ablation.json").string().c_str());
  return 0;
}

int cmd_gradcheck(const Common& common, const GradcheckRequest& req, bool verbose) {
  const RunConfig cfg = load_config(common);
  const auto result = run_gradcheck(cfg, load_corpus(cfg), req);
  if (verbose) {
    for (const auto& r : result.reports) {
      std::printf("%-44s checked %4zu max_rel %.3e\n", r.parameter.c_str(), r.checked,
                  r.max_rel_error);
    }
  }
  std::printf("coverage %zu/%zu trainable parameters, %zu elements\n",
              result.parameters_checked, result.parameters_total, result.elements_checked);
  std::printf("worst %s[%zu] rel %.3e (analytic %.9e numeric %.9e)\n",
              result.worst.parameter.c_str(), result.worst.worst_index,
              result.worst.max_rel_error, result.worst.analytic, result.worst.numeric);
  std::printf("%s (tolerance %.1e)\n", result.passed ? "PASS" : "FAIL", req.tolerance);
  return result.passed ? 0 : kExitGradcheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"molproj: multimodal molecule projector toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic molecule corpus");
  std::uint64_t synth_seed = 0;
  std::size_t synth_count = 80, synth_max_atoms = 10;
  std::string synth_out;
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--count", synth_count, "Number of molecules");
  synth->add_option("--max-atoms", synth_max_atoms, "Largest molecule");
  synth->add_option("-o,--out", synth_out, "Output JSONL")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate records and write JSONL");
  std::string ingest_in, ingest_out, ingest_xyz;
  IngestOptions ingest_opts;
  ingest->add_option("-i,--input", ingest_in, "Input file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", ingest_opts.format, "Input format")
      ->check(CLI::IsMember({"jsonl"}));
  ingest->add_option("-o,--out", ingest_out, "Output JSONL")->required();
  ingest->add_option("--xyz", ingest_xyz, "XYZ frames merged by record id")
      ->check(CLI::ExistingFile);
  ingest->add_flag("--skip-invalid", ingest_opts.skip_invalid,
                   "Drop invalid records with a warning instead of failing");

  // train
  auto* train = app.add_subcommand("train", "Run a training stage");
  Common train_common;
  int stage = 1;
  std::string from, train_out;
  add_common(train, train_common);
  train->add_option("--stage", stage, "Training stage")->check(CLI::IsMember({1, 2}));
  train->add_option("--from", from, "Stage-1 checkpoint (stage 2)");
  train->add_option("--out-dir", train_out, "Override checkpoint_dir");

  // eval
  auto* eval = app.add_subcommand("eval", "Generate answers and score them");
  Common eval_common;
  EvalArgs eval_args;
  add_common(eval, eval_common);
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint")->required();
  eval->add_option("--task", eval_args.task, "caption, qa or count");
  eval->add_option("--data", eval_args.data, "JSONL molecules (default: config validation split)");
  eval->add_option("--modalities", eval_args.modalities, "Subset such as 1d,3d or all");
  eval->add_option("--out-dir", eval_args.out_dir, "Override report_dir");
  eval->add_option("--name", eval_args.stem, "Output file stem");
  eval->add_option("--max-len", eval_args.max_len, "Generation length limit");
  eval->add_flag("--stub-judge", eval_args.stub_judge, "Use the offline judge");
  eval->add_option("--judge-endpoint", eval_args.judge_endpoint, "Judge HTTP endpoint");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train variants with components disabled");
  Common ablate_common;
  std::vector<std::string> components;
  std::string ablate_out;
  add_common(ablate, ablate_common);
  ablate->add_option("--components", components,
                     "co_attention, modality_embedding, modality_dropout (default: all)")
      ->delimiter(',');
  ablate->add_option("--out-dir", ablate_out, "Override report_dir");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  Common gc_common;
  GradcheckRequest gc_req;
  add_common(gradcheck, gc_common);
  gradcheck->add_option("--module", gc_req.module, "coproj, lmstub, encoders or all")
      ->check(CLI::IsMember({"coproj", "lmstub", "encoders", "all"}));
  gradcheck->add_option("--max-elements", gc_req.options.max_elements,
                        "Elements per tensor (0 = all)");
  gradcheck->add_option("--tolerance", gc_req.tolerance, "Maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*synth) return cmd_synth(synth_seed, synth_count, synth_max_atoms, synth_out);
    if (*ingest) {
      if (!ingest_xyz.empty()) ingest_opts.xyz = ingest_xyz;
      return cmd_ingest(ingest_in, ingest_out, ingest_opts);
    }
    if (*train) return cmd_train(train_common, stage, from, train_out);
    if (*eval) return cmd_eval(eval_common, eval_args);
    if (*ablate) return cmd_ablate(ablate_common, components, ablate_out);
    if (*gradcheck) return cmd_gradcheck(gc_common, gc_req, verbose);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitUsage;
}
