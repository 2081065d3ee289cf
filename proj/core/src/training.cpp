// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/training.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include <spdlog/spdlog.h>

#include "molproj/errors.hpp"
#include "molproj/random.hpp"

namespace molproj {

namespace {

using ExampleLoss = std::function<Var(const Molecule&, const Example&, ModalityMask&)>;

std::vector<StepRecord> run_training(MolecularAssistant& model,
                                     std::span<const Molecule> corpus,
                                     std::span<const Task> tasks,
                                     const TrainOptions& options, const std::string& tag,
                                     const ExampleLoss& example_loss) {
  if (corpus.empty()) throw ValidationError(tag + ": empty training corpus");
  if (options.batch_size == 0) throw ConfigError(tag + ": batch size must be positive");
  const std::vector<Example> examples = make_examples(corpus, tasks);

  Rng order = Rng::stream(options.seed, "data." + tag);
  Rng dropout = Rng::stream(options.seed, "dropout." + tag);
  std::vector<std::size_t> perm(examples.size());
  std::size_t cursor = perm.size();
  auto next_example = [&]() -> const Example& {
    if (cursor == perm.size()) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[order.index(i)]);
      cursor = 0;
    }
    return examples[perm[cursor++]];
  };

  ParameterStore& store = model.store();
  Adam adam(options.adam);
  std::vector<StepRecord> records;
  records.reserve(options.steps);
  const double inv_batch = 1.0 / static_cast<double>(options.batch_size);
  for (std::size_t step = 1; step <= options.steps; ++step) {
    store.zero_grad();
    StepRecord rec;
    rec.step = step;
    rec.lr = adam.config().lr;
    for (std::size_t k = 0; k < options.batch_size; ++k) {
      const Example& ex = next_example();
      const Molecule& mol = corpus[ex.molecule];
      ModalityMask mask = sample_modality_mask(dropout, options.p_drop);
      const Var loss = example_loss(mol, ex, mask);
      for (Modality m : kAllModalities)
        if (mask.contains(m)) ++rec.modality_counts[static_cast<std::size_t>(m)];
      rec.loss += loss.value()[0] * inv_batch;
      backward(scale(loss, inv_batch));
    }
    adam.step(store);
    model.projector().clamp_sigma();
    if (options.on_step) options.on_step(rec);
    if (step == 1 || step % 50 == 0 || step == options.steps) {
      spdlog::debug("{} step {} loss {:.4f}", tag, step, rec.loss);
    }
    records.push_back(rec);
  }
  return records;
}

Var molecule_loss(const MolecularAssistant& model, const Molecule& mol, const Example& ex,
                  ModalityMask& mask) {
  mask = model.usable_mask(mol, mask);
  return model.loss(mol, ex.instruction, ex.response, mask);
}

}  // namespace

std::vector<StepRecord> pretrain_lm(MolecularAssistant& model,
                                    std::span<const Molecule> corpus,
                                    const TrainOptions& options) {
  ParameterStore& store = model.store();
  store.set_all_trainable(false);
  store.set_trainable("lm.", true);
  const auto tasks = all_tasks();
  return run_training(model, corpus, tasks, options, "pretrain",
                      [&model](const Molecule& mol, const Example& ex, ModalityMask&) {
                        return model.lm().forward_loss(model.fact_prefix(mol),
                                                       model.instruction_ids(ex.instruction),
                                                       model.response_ids(ex.response));
                      });
}

std::vector<StepRecord> train_stage1(MolecularAssistant& model,
                                     std::span<const Molecule> corpus,
                                     const TrainOptions& options) {
  ParameterStore& store = model.store();
  store.set_all_trainable(false);
  store.set_trainable("encoder.", true);
  store.set_trainable("coproj.", true);
  const Task tasks[] = {Task::caption};
  auto records = run_training(model, corpus, tasks, options, "stage1",
                              [&model](const Molecule& mol, const Example& ex, ModalityMask& mask) {
                                return molecule_loss(model, mol, ex, mask);
                              });
  model.set_stage(std::max(model.stage(), 1));
  return records;
}

std::vector<StepRecord> train_stage2(MolecularAssistant& model,
                                     std::span<const Molecule> corpus,
                                     const TrainOptions& options) {
  if (model.stage() < 1) {
    throw ValidationError("stage 2 needs a model that completed stage 1");
  }
  model.enable_lora(options.seed);
  ParameterStore& store = model.store();
  store.set_all_trainable(false);
  store.set_trainable("coproj.", true);
  store.set_trainable("lora.", true);
  const auto tasks = all_tasks();
  auto records = run_training(model, corpus, tasks, options, "stage2",
                              [&model](const Molecule& mol, const Example& ex, ModalityMask& mask) {
                                return molecule_loss(model, mol, ex, mask);
                              });
  model.set_stage(2);
  return records;
}

double validation_loss(const MolecularAssistant& model, std::span<const Molecule> corpus,
                       std::span<const Task> tasks, const ModalityMask& mask) {
  const auto examples = make_examples(corpus, tasks);
  if (examples.empty()) throw ValidationError("validation set is empty");
  double total = 0.0;
  for (const auto& ex : examples) {
    const Molecule& mol = corpus[ex.molecule];
    total += model.loss(mol, ex.instruction, ex.response, mask).value()[0];
  }
  return total / static_cast<double>(examples.size());
}

void write_training_log(std::ostream& out, std::span<const StepRecord> records) {
  out << "step,loss,lr,active_1d,active_2d,active_3d\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%zu,%zu,%zu\n", r.step, r.loss, r.lr,
                  r.modality_counts[0], r.modality_counts[1], r.modality_counts[2]);
    out << buf;
  }
}

}  // namespace molproj
