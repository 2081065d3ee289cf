// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "molproj/experiments.hpp"
#include "molproj/random.hpp"
#include "molproj/synthetic.hpp"
#include "molproj/tensor.hpp"

using namespace molproj;

namespace {

Tensor filled(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

RunConfig bench_config() {
  RunConfig cfg;  // default widths, synthetic corpus
  cfg.train_path.clear();
  cfg.val_path.clear();
  cfg.gazetteer_path.clear();
  return cfg;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = filled({n, n}, rng), b = filled({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_MoleculeTokens(benchmark::State& state) {
  const RunConfig cfg = bench_config();
  const Corpus corpus = load_corpus(cfg);
  const auto model = build_model(cfg, corpus.train);
  const auto mol = generate_synthetic(9, 1, static_cast<std::size_t>(state.range(0))).front();
  for (auto _ : state) benchmark::DoNotOptimize(model.molecule_tokens(mol, ModalityMask()));
}
BENCHMARK(BM_MoleculeTokens)->Arg(4)->Arg(10);

void BM_CaptionLossBackward(benchmark::State& state) {
  const RunConfig cfg = bench_config();
  const Corpus corpus = load_corpus(cfg);
  auto model = build_model(cfg, corpus.train);
  const Molecule& mol = corpus.train.front();
  for (auto _ : state) {
    Var loss = model.loss(mol, task_instruction(Task::caption), task_response(mol, Task::caption),
                          ModalityMask());
    backward(loss);
    model.store().zero_grad();
  }
}
BENCHMARK(BM_CaptionLossBackward);

}  // namespace

BENCHMARK_MAIN();
