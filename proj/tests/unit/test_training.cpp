// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "molproj/errors.hpp"
#include "molproj/experiments.hpp"
#include "molproj/training.hpp"
#include "test_util.hpp"

using namespace molproj;
using namespace molproj::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("molproj_training_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Tasks, ResponsesAndExamples) {
  const Molecule mol = chain_molecule(4);
  EXPECT_EQ(task_response(mol, Task::caption), *mol.caption);
  EXPECT_EQ(task_response(mol, Task::atom_count), "4");
  EXPECT_EQ(task_response(mol, Task::ring_count), "0");
  for (Task t : all_tasks()) EXPECT_EQ(parse_task(task_name(t)), t);
  EXPECT_THROW(parse_task("smiles"), ConfigError);
  Molecule bare = mol;
  bare.caption.reset();
  EXPECT_THROW(task_response(bare, Task::caption), ValidationError);

  const std::vector<Molecule> corpus = {chain_molecule(3), chain_molecule(5)};
  const auto tasks = all_tasks();
  const auto ex = make_examples(corpus, tasks);
  ASSERT_EQ(ex.size(), 2 * tasks.size());
  EXPECT_EQ(ex[tasks.size()].molecule, 1u);
  EXPECT_EQ(ex[1].task, tasks[1]);
}

TEST(Tasks, TextVocabCoversResponses) {
  const auto corpus = generate_synthetic(3, 10, 8);
  const auto vocab = build_text_vocab(corpus);
  for (const auto& mol : corpus)
    for (Task t : all_tasks()) {
      for (const auto& w : whitespace_tokens(task_response(mol, t)))
        EXPECT_TRUE(vocab.contains(w)) << w;
      for (const auto& w : whitespace_tokens(task_instruction(t))) EXPECT_TRUE(vocab.contains(w)) << w;
    }
  for (const auto& w : whitespace_tokens(fact_sheet(corpus[0]))) EXPECT_TRUE(vocab.contains(w)) << w;
}

TEST(Stages, FrozenParametersKeepTheirHashes) {
  const RunConfig cfg = tiny_run_config();
  const Corpus corpus = load_corpus(cfg);
  auto model = build_model(cfg, corpus.train);
  auto& store = model.store();

  const auto lm0 = store.hash("lm."), enc0 = store.hash("encoder."), proj0 = store.hash("coproj.");
  pretrain_lm(model, corpus.train, train_options(cfg, cfg.pretrain_steps, cfg.pretrain_lr, 0.0));
  EXPECT_NE(store.hash("lm."), lm0);
  EXPECT_EQ(store.hash("encoder."), enc0);
  EXPECT_EQ(store.hash("coproj."), proj0);

  const auto lm1 = store.hash("lm.");
  train_stage1(model, corpus.train, train_options(cfg, cfg.steps, cfg.lr, cfg.p_drop));
  EXPECT_EQ(store.hash("lm."), lm1);
  EXPECT_NE(store.hash("encoder."), enc0);
  EXPECT_NE(store.hash("coproj."), proj0);
  EXPECT_EQ(model.stage(), 1);

  const auto enc2 = store.hash("encoder."), proj2 = store.hash("coproj.");
  train_stage2(model, corpus.train, train_options(cfg, cfg.stage2_steps, cfg.lr, cfg.p_drop));
  EXPECT_EQ(store.hash("lm."), lm1);
  EXPECT_EQ(store.hash("encoder."), enc2);
  EXPECT_NE(store.hash("coproj."), proj2);
  EXPECT_TRUE(model.lm().has_lora());
  EXPECT_NE(store.get("lora.block0.attn.wq.b").var.value(),
            Tensor(store.get("lora.block0.attn.wq.b").var.shape()));
  EXPECT_EQ(model.stage(), 2);
}

TEST(Stages, StageTwoRequiresStageOne) {
  const RunConfig cfg = tiny_run_config();
  const Corpus corpus = load_corpus(cfg);
  auto model = build_model(cfg, corpus.train);
  EXPECT_THROW(train_stage2(model, corpus.train, train_options(cfg, 1, cfg.lr, 0.0)),
               ValidationError);
  EXPECT_THROW(train_stage1(model, {}, train_options(cfg, 1, cfg.lr, 0.0)), ValidationError);

  const fs::path dir = scratch("stage_gate");
  auto fresh = build_model(cfg, corpus.train);
  save_checkpoint(dir / "fresh.ckpt", snapshot(fresh, cfg));
  EXPECT_THROW(run_stage2(cfg, corpus, dir / "fresh.ckpt", dir), ValidationError);
}

TEST(Stages, RunsAreDeterministicAndLogged) {
  const RunConfig cfg = tiny_run_config();
  const Corpus corpus = load_corpus(cfg);
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const auto s1a = run_stage1(cfg, corpus, a);
  const auto s1b = run_stage1(cfg, corpus, b);
  EXPECT_EQ(slurp(s1a.checkpoint), slurp(s1b.checkpoint));
  EXPECT_EQ(slurp(s1a.log), slurp(s1b.log));
  const auto s2a = run_stage2(cfg, corpus, s1a.checkpoint, a);
  const auto s2b = run_stage2(cfg, corpus, s1b.checkpoint, b);
  EXPECT_EQ(slurp(s2a.checkpoint), slurp(s2b.checkpoint));

  std::istringstream log(slurp(s1a.log));
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line, "step,loss,lr,active_1d,active_2d,active_3d");
  std::size_t rows = 0;
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, cfg.steps);
  EXPECT_TRUE(fs::exists(a / "pretrain_log.csv"));
  EXPECT_TRUE(fs::exists(a / "stage2_log.csv"));

  RunConfig other = cfg;
  other.seed = 1;
  const auto s1c = run_stage1(other, corpus, scratch("det_c"));
  EXPECT_NE(slurp(s1c.checkpoint), slurp(s1a.checkpoint));
}

TEST(Stages, DropoutCountsAppearInRecords) {
  const RunConfig cfg = tiny_run_config();
  const Corpus corpus = load_corpus(cfg);
  auto model = build_model(cfg, corpus.train);
  auto opts = train_options(cfg, 3, cfg.lr, 0.5);
  std::size_t callbacks = 0;
  opts.on_step = [&](const StepRecord&) { ++callbacks; };
  const auto records = train_stage1(model, corpus.train, opts);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(callbacks, 3u);
  for (const auto& r : records) {
    EXPECT_EQ(r.step, &r - records.data() + 1u);
    std::size_t total = 0;
    for (auto c : r.modality_counts) {
      EXPECT_LE(c, cfg.batch_size);
      total += c;
    }
    EXPECT_GE(total, cfg.batch_size);  // every example keeps at least one modality
  }
  const auto no_drop = train_stage1(model, corpus.train, train_options(cfg, 1, cfg.lr, 0.0));
  for (auto c : no_drop[0].modality_counts) EXPECT_EQ(c, cfg.batch_size);
}

TEST(Stages, ValidationLossUsesEveryTask) {
  const RunConfig cfg = tiny_run_config();
  const Corpus corpus = load_corpus(cfg);
  auto model = build_model(cfg, corpus.train);
  const auto tasks = all_tasks();
  const double all = validation_loss(model, corpus.val, tasks);
  double sum = 0.0;
  for (Task t : tasks) sum += validation_loss(model, corpus.val, std::span<const Task>(&t, 1));
  EXPECT_NEAR(all, sum / static_cast<double>(tasks.size()), 1e-12);
  EXPECT_THROW(validation_loss(model, {}, tasks), ValidationError);
}
