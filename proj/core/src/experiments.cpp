// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "molproj/errors.hpp"
#include "molproj/selfies.hpp"
#include "molproj/synthetic.hpp"

namespace molproj {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

void write_log(const std::filesystem::path& path, std::span<const StepRecord> records) {
  auto out = open_output(path);
  write_training_log(out, records);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

// -- data ----------------------------------------------------------------------

Corpus load_corpus(const RunConfig& config) {
  Corpus c;
  if (config.train_path.empty()) {
    auto all = generate_synthetic(config.data_seed, config.train_count + config.val_count,
                                  config.max_atoms);
    c.val.assign(std::make_move_iterator(all.begin() + static_cast<long>(config.train_count)),
                 std::make_move_iterator(all.end()));
    all.resize(config.train_count);
    c.train = std::move(all);
    return c;
  }
  c.train = load_dataset(config.train_path).molecules;
  if (!config.val_path.empty()) c.val = load_dataset(config.val_path).molecules;
  if (c.train.empty()) throw ValidationError("training set " + config.train_path + " is empty");
  return c;
}

MolecularAssistant build_model(const RunConfig& config, std::span<const Molecule> train) {
  return MolecularAssistant::create(config.model_config(), build_vocab(train),
                                    build_text_vocab(train), config.seed);
}

std::string default_gazetteer_text() {
  std::string out = "# term\tconfidence\tcanonical\n";
  auto line = [&out](const std::string& term, const char* conf, const std::string& canon) {
    out += term + "\t" + conf + "\t" + canon + "\n";
  };
  for (const auto& [symbol, name] : caption_elements()) {
    line(name, "1.0", name);
    for (int k = 0; k <= 64; ++k) {
      line(std::to_string(k) + " " + name + " atoms", "1.0", name + "=" + std::to_string(k));
    }
  }
  line("acyclic", "1.0", "rings=0");
  line("a ring", "1.0", "rings=1");
  for (int k = 2; k <= 8; ++k) line(std::to_string(k) + " rings", "1.0", "rings=" + std::to_string(k));
  line("double bond", "1.0", "double bond");
  line("molecule", "0.5", "molecule");
  line("atoms", "0.3", "atoms");
  return out;
}

EntityGazetteer load_gazetteer(const RunConfig& config) {
  if (!config.gazetteer_path.empty()) return EntityGazetteer::load(config.gazetteer_path);
  std::istringstream in(default_gazetteer_text());
  return EntityGazetteer::parse(in);
}

IngestResult run_ingest(const std::filesystem::path& input,
                        const std::filesystem::path& output, const IngestOptions& options) {
  LoadOptions lo;
  lo.skip_invalid = options.skip_invalid;
  LoadResult loaded = load_dataset(input, options.format, lo);
  IngestResult result;
  result.rejected = std::move(loaded.rejected);
  for (const auto& issue : result.rejected) {
    spdlog::warn("skipped line {} ({}): {}", issue.line, issue.id.empty() ? "?" : issue.id,
                 issue.message);
  }
  if (options.xyz) {
    std::ifstream in(*options.xyz);
    if (!in) throw ValidationError("cannot open " + options.xyz->string());
    result.merged = merge_xyz(loaded.molecules, read_xyz(in));
  }
  auto out = open_output(output);
  write_jsonl(out, loaded.molecules);
  result.written = loaded.molecules.size();
  return result;
}

// -- training ------------------------------------------------------------------

TrainOptions train_options(const RunConfig& config, std::size_t steps, double lr,
                           double p_drop) {
  TrainOptions o;
  o.steps = steps;
  o.batch_size = config.batch_size;
  o.adam = config.adam();
  o.adam.lr = lr;
  o.p_drop = p_drop;
  o.seed = config.seed;
  return o;
}

StageOutputs run_stage1(const RunConfig& config, const Corpus& corpus,
                        const std::filesystem::path& out_dir) {
  const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(config.checkpoint_dir) : out_dir;
  auto model = build_model(config, corpus.train);
  const auto pre = pretrain_lm(model, corpus.train,
                               train_options(config, config.pretrain_steps, config.pretrain_lr, 0.0));
  write_log(dir / "pretrain_log.csv", pre);
  StageOutputs out;
  out.records =
      train_stage1(model, corpus.train, train_options(config, config.steps, config.lr, config.p_drop));
  out.log = dir / "stage1_log.csv";
  write_log(out.log, out.records);
  out.checkpoint = dir / "stage1.ckpt";
  save_checkpoint(out.checkpoint, snapshot(model, config));
  return out;
}

StageOutputs run_stage2(const RunConfig& config, const Corpus& corpus,
                        const std::filesystem::path& from,
                        const std::filesystem::path& out_dir) {
  const Checkpoint ckpt = load_checkpoint(from);
  if (ckpt.stage < 1) {
    throw ValidationError("checkpoint " + from.string() + " has not completed stage 1");
  }
  auto model = restore_model(ckpt, config);
  const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(config.checkpoint_dir) : out_dir;
  StageOutputs out;
  out.records = train_stage2(model, corpus.train,
                             train_options(config, config.stage2_steps, config.lr, config.p_drop));
  out.log = dir / "stage2_log.csv";
  write_log(out.log, out.records);
  out.checkpoint = dir / "stage2.ckpt";
  save_checkpoint(out.checkpoint, snapshot(model, config));
  return out;
}

// -- evaluation ----------------------------------------------------------------

std::string eval_task_name(EvalTask t) {
  switch (t) {
    case EvalTask::caption: return "caption";
    case EvalTask::qa: return "qa";
    case EvalTask::count: return "count";
  }
  return "?";
}

EvalTask parse_eval_task(const std::string& name) {
  if (name == "caption") return EvalTask::caption;
  if (name == "qa") return EvalTask::qa;
  if (name == "count") return EvalTask::count;
  throw ConfigError("unknown eval task '" + name + "' (expected caption, qa or count)");
}

std::vector<Task> eval_task_members(EvalTask t) {
  switch (t) {
    case EvalTask::caption: return {Task::caption};
    case EvalTask::qa: return {Task::mean_distance};
    case EvalTask::count: return {Task::atom_count, Task::ring_count};
  }
  return {};
}

EvalOutputs run_eval(const MolecularAssistant& model, std::span<const Molecule> molecules,
                     const EntityGazetteer& gazetteer, const EvalRequest& request,
                     JudgeTransport* transport) {
  const auto tasks = eval_task_members(request.task);
  const bool numeric = request.task != EvalTask::caption;
  EvalOutputs out;
  for (const auto& mol : molecules) {
    for (Task t : tasks) {
      TextRecord ref;
      ref.id = numeric ? mol.id + ":" + task_name(t) : mol.id;
      ref.text = task_response(mol, t);
      if (numeric) ref.value = parse_numeric_answer(ref.text).value;
      ref.selfies = mol.selfies;
      TextRecord pred;
      pred.id = ref.id;
      pred.text = model.answer(mol, task_instruction(t), request.mask, request.max_len);
      out.references.push_back(std::move(ref));
      out.predictions.push_back(std::move(pred));
    }
  }
  EvalOptions options = request.options;
  options.numeric = numeric;
  if (numeric) options.judge = false;
  options.metadata["task"] = eval_task_name(request.task);
  options.metadata["modalities"] = request.mask.to_string();
  options.metadata["molecules"] = std::to_string(molecules.size());
  options.metadata["max_len"] = std::to_string(request.max_len);
  out.report = evaluate_corpus(out.predictions, out.references, gazetteer, options, transport);
  return out;
}

std::filesystem::path write_eval_outputs(const std::filesystem::path& dir,
                                         const std::string& stem, const EvalOutputs& out) {
  {
    auto f = open_output(dir / (stem + ".predictions.jsonl"));
    write_text_records(f, out.predictions);
  }
  {
    auto f = open_output(dir / (stem + ".references.jsonl"));
    write_text_records(f, out.references);
  }
  {
    auto f = open_output(dir / (stem + ".txt"));
    write_report_text(f, out.report);
  }
  const auto json_path = dir / (stem + ".json");
  auto f = open_output(json_path);
  write_report_json(f, out.report);
  return json_path;
}

// -- ablation ------------------------------------------------------------------

const std::vector<std::string>& ablation_components() {
  static const std::vector<std::string> names = {"co_attention", "modality_embedding",
                                                 "modality_dropout"};
  return names;
}

RunConfig ablated_config(const RunConfig& config, const std::string& component) {
  RunConfig v = config;
  if (component == "co_attention") {
    v.co_attention = false;
  } else if (component == "modality_embedding") {
    v.modality_embedding = false;
  } else if (component == "modality_dropout") {
    v.p_drop = 0.0;
  } else {
    throw ConfigError("unknown ablation component '" + component +
                      "' (expected co_attention, modality_embedding or modality_dropout)");
  }
  return v;
}

AblationReport run_ablation(const RunConfig& config, const Corpus& corpus,
                            std::span<const std::string> components,
                            const std::function<void(const AblationRow&)>& on_row) {
  std::vector<std::pair<std::string, RunConfig>> variants = {{"full", config}};
  std::set<std::string> seen;
  for (const auto& c : components) {
    if (!seen.insert(c).second) throw ConfigError("ablation component '" + c + "' repeated");
    variants.emplace_back(c, ablated_config(config, c));
  }
  if (corpus.val.empty()) throw ValidationError("ablation needs a validation split");
  const Task caption[] = {Task::caption};
  AblationReport report;
  for (const auto& [name, vcfg] : variants) {
    spdlog::info("ablation variant {}", name);
    auto model = build_model(vcfg, corpus.train);
    pretrain_lm(model, corpus.train,
                train_options(vcfg, vcfg.pretrain_steps, vcfg.pretrain_lr, 0.0));
    AblationRow row;
    row.variant = name;
    row.config = vcfg;
    row.stage1 =
        train_stage1(model, corpus.train, train_options(vcfg, vcfg.steps, vcfg.lr, vcfg.p_drop));
    row.caption_val_loss = validation_loss(model, corpus.val, caption);
    for (Modality m : kAllModalities) {
      row.single_val_loss[static_cast<std::size_t>(m)] =
          validation_loss(model, corpus.val, caption, ModalityMask{m});
    }
    if (on_row) on_row(row);
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_ablation_json(std::ostream& out, const AblationReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json j;
    j["variant"] = r.variant;
    j["co_attention"] = r.config.co_attention;
    j["modality_embedding"] = r.config.modality_embedding;
    j["p_drop"] = r.config.p_drop;
    j["stage1_first_loss"] = r.stage1.empty() ? 0.0 : r.stage1.front().loss;
    j["stage1_last_loss"] = r.stage1.empty() ? 0.0 : r.stage1.back().loss;
    j["caption_val_loss"] = r.caption_val_loss;
    for (Modality m : kAllModalities) {
      j["caption_val_loss_" + modality_name(m)] =
          r.single_val_loss[static_cast<std::size_t>(m)];
    }
    rows.push_back(std::move(j));
  }
  nlohmann::ordered_json doc;
  doc["variants"] = std::move(rows);
  out << doc.dump(2) << '\n';
}

void write_ablation_text(std::ostream& out, const AblationReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %7s %10s %10s %10s %10s %10s\n", "variant", "p_drop",
                "step1", "last", "val", "val_1d", "val_2d");
  out << buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-20s %7s %10s %10s %10s %10s %10s\n", r.variant.c_str(),
                  fixed(r.config.p_drop, 2).c_str(),
                  fixed(r.stage1.empty() ? 0.0 : r.stage1.front().loss, 4).c_str(),
                  fixed(r.stage1.empty() ? 0.0 : r.stage1.back().loss, 4).c_str(),
                  fixed(r.caption_val_loss, 4).c_str(), fixed(r.single_val_loss[0], 4).c_str(),
                  fixed(r.single_val_loss[1], 4).c_str());
    out << buf;
  }
  out << "val_3d:";
  for (const auto& r : report.rows) out << ' ' << r.variant << '=' << fixed(r.single_val_loss[2], 4);
  out << '\n';
}

// -- gradient check ------------------------------------------------------------

Molecule gradcheck_molecule() {
  Molecule mol;
  mol.id = "gradcheck-4";
  mol.atoms = {"C", "C", "O", "N"};
  mol.bonds = {{0, 1, 1}, {1, 2, 2}, {2, 3, 1}, {0, 3, 1}};
  mol.coords = Tensor::matrix({{0.00, 0.00, 0.00},
                               {1.52, 0.05, -0.03},
                               {1.61, 1.40, 0.12},
                               {0.08, 1.37, -0.21}});
  mol.selfies = write_selfies(mol);
  mol.caption = describe_molecule(mol);
  mol.properties = toy_properties(mol);
  validate(mol);
  return mol;
}

GradcheckResult run_gradcheck(const RunConfig& config, const Corpus& corpus,
                              const GradcheckRequest& request) {
  std::vector<std::string> prefixes;
  if (request.module == "coproj") {
    prefixes = {"coproj."};
  } else if (request.module == "lmstub") {
    prefixes = {"lm.", "lora."};
  } else if (request.module == "encoders") {
    prefixes = {"encoder."};
  } else if (request.module == "all") {
    prefixes = {""};
  } else {
    throw ConfigError("unknown gradcheck module '" + request.module +
                      "' (expected coproj, lmstub, encoders or all)");
  }

  auto model = build_model(config, corpus.train);
  model.enable_lora(config.seed);
  Rng rng = Rng::stream(config.seed, "gradcheck");
  for (auto& p : model.store().all()) {
    const auto& n = p.name;
    if (n.rfind("lora.", 0) == 0 && n.size() > 2 && n.compare(n.size() - 2, 2, ".b") == 0) {
      p.var.mutable_value() = normal_tensor(p.var.shape(), 0.1, rng);
    }
  }
  model.store().set_all_trainable(true);

  const Molecule mol = gradcheck_molecule();
  const std::string instruction = task_instruction(Task::caption);
  const std::string response = task_response(mol, Task::caption);
  const auto loss_fn = [&]() {
    Var loss = model.loss(mol, instruction, response, ModalityMask{});
    if (request.extra_term) loss = add(loss, request.extra_term(model));
    return loss;
  };

  std::vector<Parameter> selected;
  GradcheckResult result;
  for (const auto& p : model.store().all()) {
    if (!p.trainable) continue;
    ++result.parameters_total;
    for (const auto& prefix : prefixes) {
      if (p.name.rfind(prefix, 0) == 0) {
        selected.push_back(p);
        break;
      }
    }
  }
  result.reports = gradcheck(loss_fn, selected, request.options);
  result.parameters_checked = result.reports.size();
  result.passed = true;
  for (const auto& r : result.reports) {
    result.elements_checked += r.checked;
    if (r.max_rel_error > result.worst.max_rel_error || result.worst.parameter.empty()) {
      result.worst = r;
    }
    if (!(r.max_rel_error <= request.tolerance)) result.passed = false;
  }
  return result;
}

}  // namespace molproj
