// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "molproj/errors.hpp"
#include "molproj/lmstub.hpp"
#include "molproj/optim.hpp"
#include "test_util.hpp"

using namespace molproj;
using namespace molproj::testing;

namespace {

struct LmFixture {
  ParameterStore store;
  DecoderLM lm;
  explicit LmFixture(std::size_t blocks = 2, std::size_t max_seq = 16, std::uint64_t seed = 3) {
    Rng rng(seed);
    LmConfig cfg;
    cfg.vocab_size = 12;
    cfg.width = 8;
    cfg.blocks = blocks;
    cfg.heads = 2;
    cfg.max_seq = max_seq;
    cfg.mlp_ratio = 2;
    lm = DecoderLM::create(store, cfg, rng);
  }
  Var prefix(std::size_t rows, std::uint64_t seed = 9) const {
    Rng rng(seed);
    return constant(random_tensor({rows, 8}, rng));
  }
};

std::vector<std::size_t> ids(std::initializer_list<std::size_t> v) { return v; }

}  // namespace

TEST(TextVocab, SpecialsAndEncoding) {
  TextVocab v;
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.word(TextVocab::kBos), "<bos>");
  EXPECT_EQ(v.add("carbon"), 4u);
  EXPECT_EQ(v.add("carbon"), 4u);
  EXPECT_EQ(v.encode("Carbon  ring"), (std::vector<std::size_t>{4, TextVocab::kUnknown}));
  const std::size_t seq[] = {TextVocab::kBos, 4, 4, TextVocab::kEos};
  EXPECT_EQ(v.decode(seq), "carbon carbon");
  EXPECT_EQ(TextVocab::from_words(v.words()), v);
  const std::vector<std::string> bad = {"a", "b", "c", "d"};
  EXPECT_THROW(TextVocab::from_words(bad), ConfigError);
  EXPECT_EQ(whitespace_tokens("  a b\tc\n"), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(DecoderLM, ParameterNamesAndConfigErrors) {
  LmFixture f;
  for (const char* name : {"lm.tok_emb", "lm.pos_emb", "lm.block1.ln2.gain", "lm.block0.attn.wo",
                           "lm.block1.fc2.bias", "lm.lnf.bias", "lm.head.weight"})
    EXPECT_TRUE(f.store.contains(name)) << name;
  EXPECT_EQ(f.lm.attention_weight_names().size(), 8u);
  ParameterStore s;
  Rng rng(0);
  LmConfig bad;
  bad.vocab_size = 10;
  bad.width = 6;
  bad.heads = 4;
  EXPECT_THROW(DecoderLM::create(s, bad, rng), ConfigError);
}

TEST(Lora, ZeroInitIsBitExact) {
  LmFixture f;
  const Var prefix = f.prefix(3);
  const auto input = ids({2, 5, 7, 4});
  const Tensor base = f.lm.logits(prefix, input).value();
  const Tensor base_loss = f.lm.forward_loss(prefix, ids({2, 5}), ids({7, 4, 3})).value();
  Rng rng(1);
  f.lm.apply_lora(f.store, {}, rng);
  ASSERT_TRUE(f.lm.has_lora());
  EXPECT_EQ(f.lm.logits(prefix, input).value(), base);
  EXPECT_EQ(f.lm.forward_loss(prefix, ids({2, 5}), ids({7, 4, 3})).value(), base_loss);
}

TEST(Lora, TargetsExpandAndNameParameters) {
  LmFixture f;
  Rng rng(1);
  LoraConfig cfg;
  cfg.rank = 3;
  cfg.alpha = 6.0;
  f.lm.apply_lora(f.store, cfg, rng);
  ASSERT_EQ(f.lm.adapters().size(), 4u);
  EXPECT_EQ(f.store.get("lora.block1.attn.wv.a").var.shape(), (Shape{8, 3}));
  EXPECT_EQ(f.store.get("lora.block1.attn.wv.b").var.shape(), (Shape{3, 8}));
  for (const auto& a : f.lm.adapters()) {
    EXPECT_EQ(a.scaling, 2.0);
    EXPECT_EQ(a.b.value(), Tensor({3, 8}));
  }
  EXPECT_THROW(f.lm.apply_lora(f.store, cfg, rng), ConfigError);

  LmFixture g;
  LoraConfig one;
  one.targets = {"lm.block0.attn.wk"};
  g.lm.apply_lora(g.store, one, rng);
  EXPECT_EQ(g.lm.adapters().size(), 1u);
  LoraConfig unknown;
  unknown.targets = {"wz"};
  EXPECT_THROW(g.lm.apply_lora(g.store, unknown, rng), ConfigError);
  LoraConfig zero;
  zero.rank = 0;
  EXPECT_THROW(g.lm.apply_lora(g.store, zero, rng), ConfigError);
}

TEST(Lora, EffectiveWeightEqualsMergedMatrix) {
  LmFixture adapted(1), merged(1);
  Rng rng(2);
  LoraConfig cfg;
  cfg.targets = {"wq"};
  adapted.lm.apply_lora(adapted.store, cfg, rng);
  const auto& ad = adapted.lm.adapters().front();
  Var b = adapted.store.get("lora.block0.attn.wq.b").var;
  b.mutable_value() = random_tensor(b.shape(), rng, 0.3);

  // W + (alpha / r) A B folded into a plain model with identical base weights.
  Tensor w = adapted.store.get("lm.block0.attn.wq").var.value();
  const Tensor ab = matmul(ad.a.value(), b.value());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += ad.scaling * ab[i];
  merged.store.get("lm.block0.attn.wq").var.mutable_value() = w;

  const Var prefix = adapted.prefix(2);
  EXPECT_LE(max_abs_diff(adapted.lm.logits(prefix, ids({2, 6, 1})).value(),
                         merged.lm.logits(prefix, ids({2, 6, 1})).value()),
            1e-12);
}

TEST(DecoderLM, LossMatchesManualCrossEntropyOverResponse) {
  LmFixture f;
  const Var prefix = f.prefix(2);
  const auto instr = ids({2, 5}), resp = ids({7, 9, 3});
  const Tensor l = f.lm.logits(prefix, ids({2, 5, 7, 9})).value();
  double nll = 0.0;
  // Response token k is predicted at position prefix + |instruction| + k - 1.
  for (std::size_t k = 0; k < resp.size(); ++k) {
    const std::size_t row = 2 + 2 + k - 1;
    double mx = -INFINITY, z = 0.0;
    for (std::size_t j = 0; j < l.cols(); ++j) mx = std::max(mx, l(row, j));
    for (std::size_t j = 0; j < l.cols(); ++j) z += std::exp(l(row, j) - mx);
    nll += std::log(z) + mx - l(row, resp[k]);
  }
  EXPECT_NEAR(f.lm.forward_loss(prefix, instr, resp).value()[0], nll / 3.0, 1e-12);
  EXPECT_THROW(f.lm.forward_loss(prefix, instr, {}), ShapeError);
  EXPECT_THROW(f.lm.forward_loss({}, {}, resp), ShapeError);
}

TEST(DecoderLM, IsCausal) {
  LmFixture f;
  const Var prefix = f.prefix(3);
  const Tensor a = f.lm.logits(prefix, ids({2, 4, 6, 8, 10})).value();
  const Tensor b = f.lm.logits(prefix, ids({2, 4, 6, 1, 1})).value();
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t j = 0; j < a.cols(); ++j) EXPECT_EQ(a(r, j), b(r, j)) << r;
  bool later_differs = false;
  for (std::size_t j = 0; j < a.cols(); ++j) later_differs |= a(6, j) != b(6, j);
  EXPECT_TRUE(later_differs);
}

TEST(DecoderLM, SequenceLimits) {
  LmFixture f(1, 6);
  const Var prefix = f.prefix(4);
  EXPECT_NO_THROW(f.lm.logits(prefix, ids({2, 4})));
  EXPECT_THROW(f.lm.logits(prefix, ids({2, 4, 5})), ShapeError);
  EXPECT_THROW(f.lm.forward_loss(prefix, ids({2, 4}), ids({3})), ShapeError);
  EXPECT_THROW(f.lm.logits(constant(Tensor({2, 5})), ids({2})), ShapeError);
  EXPECT_THROW(f.lm.logits({}, ids({12})), ShapeError);
  EXPECT_THROW(f.lm.logits({}, {}), ShapeError);
  // Generation stops at the context limit.
  EXPECT_LE(f.lm.generate(prefix, ids({2}), 10).size(), 2u);
}

TEST(DecoderLM, GreedyGenerationAndEos) {
  LmFixture f(1);
  Var head_bias = f.store.get("lm.head.bias").var;
  head_bias.mutable_value() = Tensor({12});
  head_bias.mutable_value()[6] = 1e6;
  EXPECT_EQ(f.lm.generate(f.prefix(2), ids({2}), 4), ids({6, 6, 6, 6}));
  head_bias.mutable_value()[TextVocab::kEos] = 2e6;
  EXPECT_TRUE(f.lm.generate(f.prefix(2), ids({2}), 4).empty());
}

TEST(DecoderLM, GradientsMatchFiniteDifferences) {
  LmFixture f(1, 8);
  Rng rng(4);
  f.lm.apply_lora(f.store, {.rank = 2, .alpha = 4.0, .targets = {"wq", "wv"}}, rng);
  for (const char* name : {"lora.block0.attn.wq.b", "lora.block0.attn.wv.b"}) {
    Var b = f.store.get(name).var;
    b.mutable_value() = random_tensor(b.shape(), rng, 0.1);
  }
  Var prefix = variable(f.prefix(2).value());
  auto loss = [&]() { return f.lm.forward_loss(prefix, ids({2, 5}), ids({7, 3})); };
  auto params = f.store.all();
  params.push_back({"prefix", prefix, true});
  GradcheckOptions opts;
  opts.step = 1e-3;
  opts.extrapolate = true;
  opts.max_elements = 12;
  opts.min_denominator = 1e-6;
  for (const auto& r : gradcheck(loss, params, opts))
    EXPECT_LE(r.max_rel_error, 1e-5) << r.parameter << " analytic " << r.analytic << " numeric "
                                     << r.numeric;
}
