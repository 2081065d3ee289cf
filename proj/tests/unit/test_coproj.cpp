// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <numbers>

#include <gtest/gtest.h>

#include "molproj/coproj.hpp"
#include "molproj/errors.hpp"
#include "molproj/experiments.hpp"
#include "molproj/optim.hpp"
#include "test_util.hpp"

using namespace molproj;
using namespace molproj::testing;

namespace {

// Per-head scalar loops: softmax(q_h k_h^T / sqrt(dh) + bias_h) v_h, heads
// concatenated, then Wo.
Tensor attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* bias,
                        const AttentionWeights& w, std::size_t heads) {
  const Tensor qp = matmul(q, w.wq.value()), kp = matmul(k, w.wk.value()),
               vp = matmul(v, w.wv.value());
  const std::size_t a = qp.rows(), t = kp.rows(), d = qp.cols(), dh = d / heads;
  Tensor merged({a, d});
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < a; ++i) {
      std::vector<double> logit(t);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qp(i, h * dh + c) * kp(j, h * dh + c);
        s /= std::sqrt(static_cast<double>(dh));
        if (bias) s += bias->rank() == 2 ? (*bias)(i, j) : (*bias)[(h * a + i) * t + j];
        logit[j] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (double& l : logit) z += (l = std::exp(l - mx));
      for (std::size_t c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < t; ++j) acc += logit[j] / z * vp(j, h * dh + c);
        merged(i, h * dh + c) = acc;
      }
    }
  }
  return w.wo ? matmul(merged, w.wo.value()) : merged;
}

struct ProjFixture {
  ParameterStore store;
  Projector proj;
  explicit ProjFixture(std::uint64_t seed = 1) {
    Rng rng(seed);
    ProjectorConfig cfg;
    cfg.layers = 2;
    cfg.d1 = 6;
    cfg.d2 = 4;
    cfg.d3 = 4;
    cfg.d = 8;
    cfg.query_tokens = 3;
    cfg.heads = 2;
    cfg.kernels = 5;
    cfg.spd_max = 3;
    proj = Projector::create(store, cfg, rng);
  }
};

struct ModelFixture {
  RunConfig config = tiny_run_config();
  std::vector<Molecule> train = generate_synthetic(0, 6, 6);
  MolecularAssistant model = build_model(config, train);
};

}  // namespace

TEST(ModalityMask, ParseFormatAndSubsets) {
  EXPECT_EQ(ModalityMask().bits(), 7u);
  EXPECT_EQ(ModalityMask::parse("all"), ModalityMask());
  EXPECT_EQ(ModalityMask::parse("3d, 1d").bits(), 5u);
  EXPECT_EQ(ModalityMask::parse("2d").to_string(), "2d");
  EXPECT_EQ(ModalityMask().to_string(), "1d,2d,3d");
  EXPECT_THROW(ModalityMask::parse(""), ConfigError);
  EXPECT_THROW(ModalityMask::parse("5d"), ConfigError);
  EXPECT_THROW(ModalityMask::from_bits(0), ConfigError);
  EXPECT_THROW(ModalityMask({Modality::two_d}).without(Modality::two_d), ConfigError);
  EXPECT_EQ(ModalityMask().without(Modality::one_d).count(), 2u);
  const auto subsets = ModalityMask::all_subsets();
  ASSERT_EQ(subsets.size(), 7u);
  for (unsigned b = 1; b <= 7; ++b) EXPECT_EQ(subsets[b - 1].bits(), b);
}

TEST(ModalityDropout, FrequenciesMatchEnumeratedDistribution) {
  const double p = 0.3;
  // P(mask) for every nonempty outcome, renormalized over nonempty draws.
  std::map<unsigned, double> prob;
  const double nonempty = 1.0 - p * p * p;
  for (unsigned b = 1; b <= 7; ++b) {
    double q = 1.0;
    for (unsigned m = 0; m < 3; ++m) q *= (b >> m & 1) ? 1.0 - p : p;
    prob[b] = q / nonempty;
  }
  double drop1d = 0.0;
  for (const auto& [b, q] : prob)
    if (!(b & 1)) drop1d += q;
  EXPECT_NEAR(expected_drop_rate(p), drop1d, 1e-15);

  Rng rng = Rng::stream(3, "dropout.test");
  const int n = 200000;
  std::map<unsigned, int> seen;
  for (int i = 0; i < n; ++i) ++seen[sample_modality_mask(rng, p).bits()];
  EXPECT_EQ(seen.count(0), 0u);
  for (const auto& [b, q] : prob) {
    const double sd = std::sqrt(q * (1 - q) / n);
    EXPECT_NEAR(static_cast<double>(seen[b]) / n, q, 5 * sd) << "mask bits " << b;
  }
  Rng r0(1);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_modality_mask(r0, 0.0).bits(), 7u);
  EXPECT_THROW(sample_modality_mask(r0, 1.0), ConfigError);
  EXPECT_THROW(sample_modality_mask(r0, -0.1), ConfigError);
}

TEST(Phi2d, BucketsAndTableLookup) {
  EXPECT_EQ(spd_bucket(0, 3), 0u);
  EXPECT_EQ(spd_bucket(2, 3), 2u);
  EXPECT_EQ(spd_bucket(9, 3), 3u);
  EXPECT_EQ(spd_bucket(kUnreachable, 3), 4u);

  Molecule m;
  m.id = "two";
  m.atoms = {"C", "C", "O", "N", "C", "S"};
  m.bonds = {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 4, 1}};
  const auto spd = shortest_path_matrix(m);
  Rng rng(2);
  const Var table = constant(random_tensor({2, 5}, rng));
  const Var phi = build_phi_2d(spd, table, 3);
  ASSERT_EQ(phi.shape(), (Shape{2, 6, 6}));
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        const std::size_t bucket = i == j ? 0 : spd_bucket(spd(i, j), 3);
        EXPECT_EQ(phi.value()[(h * 6 + i) * 6 + j], table.value()(h, bucket));
      }
  EXPECT_EQ(phi.value()[(1 * 6 + 0) * 6 + 4], table.value()(1, 3));  // 4 hops clipped
  EXPECT_EQ(phi.value()[(0 * 6 + 5) * 6 + 0], table.value()(0, 4));  // unreachable
  EXPECT_THROW(build_phi_2d(spd, table, 4), ShapeError);
}

TEST(GaussianKernels, ClosedFormAtCenterAndSymmetry) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const double mu = rng.uniform(0.0, 8.0);
    const double sigma = rng.uniform(-3.0, 3.0);
    if (std::abs(sigma) < 1e-3) continue;
    const Tensor dist = Tensor::matrix({{0.0, mu}, {mu, 0.0}});
    const Var psi = gaussian_kernels(dist, constant(Tensor::vector({mu})),
                                     constant(Tensor::vector({sigma})));
    EXPECT_NEAR(psi.value()(1, 0), -1.0 / (std::sqrt(2 * std::numbers::pi) * std::abs(sigma)),
                1e-12);
    EXPECT_EQ(psi.value()(1, 0), psi.value()(2, 0));
  }
}

TEST(GaussianKernels, MatchesScalarFormula) {
  const Tensor dist = Tensor::matrix({{0.0, 1.2}, {1.2, 0.0}});
  const double mu[] = {0.0, 1.0, 2.5}, sigma[] = {0.5, -0.8, 1.5};
  const Var psi = gaussian_kernels(dist, constant(Tensor::vector({0.0, 1.0, 2.5})),
                                   constant(Tensor::vector({0.5, -0.8, 1.5})));
  ASSERT_EQ(psi.shape(), (Shape{4, 3}));
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t k = 0; k < 3; ++k) {
      const double s = std::abs(sigma[k]), u = (dist[p] - mu[k]) / s;
      EXPECT_NEAR(psi.value()(p, k), -std::exp(-0.5 * u * u) / (std::sqrt(2 * std::numbers::pi) * s),
                  1e-15);
    }
}

TEST(GaussianKernels, SigmaFloorKeepsValuesFinite) {
  const Tensor dist = Tensor::matrix({{0.0, 0.5}, {0.5, 0.0}});
  Var sigma = variable(Tensor::vector({0.0, -1e-9}));
  Var mu = variable(Tensor::vector({0.5, 0.5}));
  const Var psi = gaussian_kernels(dist, mu, sigma);
  EXPECT_TRUE(psi.value().all_finite());
  EXPECT_NEAR(psi.value()(1, 0), -1.0 / (std::sqrt(2 * std::numbers::pi) * kSigmaFloor), 1e-6);
  backward(sum(psi));
  EXPECT_EQ(sigma.grad()[0], 0.0);
  EXPECT_TRUE(mu.grad().all_finite());

  ProjFixture f;
  f.store.get("coproj.kernel_sigma").var.mutable_value()[1] = -1e-7;
  f.store.get("coproj.kernel_sigma").var.mutable_value()[2] = 2e-5;
  EXPECT_EQ(f.proj.clamp_sigma(), 2u);
  EXPECT_EQ(f.proj.kernel_sigma().value()[1], -kSigmaFloor);
  EXPECT_EQ(f.proj.kernel_sigma().value()[2], kSigmaFloor);
}

TEST(GaussianKernels, GradientsMatchFiniteDifferences) {
  const Tensor dist = pairwise_distances(*chain_molecule(4).coords);
  Var mu = variable(Tensor::vector({0.5, 1.3, 2.0}));
  Var sigma = variable(Tensor::vector({0.7, -0.9, 1.4}));
  Rng rng(5);
  const Var weights = constant(random_tensor({16, 3}, rng));
  auto loss = [&]() { return sum(mul(gaussian_kernels(dist, mu, sigma), weights)); };
  GradcheckOptions opts;
  opts.extrapolate = true;
  for (const auto& r : gradcheck(loss, {{"mu", mu, true}, {"sigma", sigma, true}}, opts))
    EXPECT_LE(r.max_rel_error, 1e-8) << r.parameter;
}

TEST(Phi3d, PairMajorMlpRearrangedPerHead) {
  ProjFixture f;
  const Tensor dist = pairwise_distances(*chain_molecule(3).coords);
  const Var phi = f.proj.phi_3d(dist);
  ASSERT_EQ(phi.shape(), (Shape{2, 3, 3}));
  const Var psi = gaussian_kernels(dist, f.proj.kernel_mu(), f.proj.kernel_sigma());
  const Var pair_out = f.proj.phi3d_mlp()(psi);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(phi.value()[(h * 3 + i) * 3 + j], pair_out.value()(i * 3 + j, h));
        EXPECT_EQ(phi.value()[(h * 3 + i) * 3 + j], phi.value()[(h * 3 + j) * 3 + i]);
      }
}

TEST(Attention, MatchesDirectFormula) {
  Rng rng(21);
  ParameterStore store;
  const auto w = AttentionWeights::create(store, "attn", 6, rng);
  const auto w_no_out = AttentionWeights::create(store, "attn2", 6, rng, false);
  const Tensor q = random_tensor({3, 6}, rng), k = random_tensor({5, 6}, rng);
  const Tensor v = random_tensor({5, 6}, rng);
  const Tensor shared = random_tensor({3, 5}, rng), per_head = random_tensor({3, 3, 5}, rng);
  AttentionOptions opts;
  opts.heads = 3;
  EXPECT_LE(max_abs_diff(biased_attention(constant(q), constant(k), constant(v), {}, w, opts).value(),
                         attention_oracle(q, k, v, nullptr, w, 3)),
            1e-13);
  EXPECT_LE(max_abs_diff(biased_attention(constant(q), constant(k), constant(v), constant(shared), w,
                                          opts)
                             .value(),
                         attention_oracle(q, k, v, &shared, w, 3)),
            1e-13);
  EXPECT_LE(max_abs_diff(biased_attention(constant(q), constant(k), constant(v), constant(per_head),
                                          w_no_out, opts)
                             .value(),
                         attention_oracle(q, k, v, &per_head, w_no_out, 3)),
            1e-13);
  EXPECT_THROW(biased_attention(constant(q), constant(k), constant(v),
                                constant(random_tensor({2, 3, 5}, rng)), w, opts),
               ShapeError);
  opts.heads = 4;
  EXPECT_THROW(biased_attention(constant(q), constant(k), constant(v), {}, w, opts), ShapeError);
}

TEST(CoAttention, ResidualPlusBiasedAttention) {
  ProjFixture f;
  Rng rng(4);
  const Tensor z = random_tensor({5, 4}, rng), bias = random_tensor({2, 5, 5}, rng);
  const auto& w = f.proj.stream_attention(Modality::two_d, 0);
  const Var out = co_attention_block(constant(z), constant(bias), w, 2);
  Tensor want = attention_oracle(z, z, z, &bias, w, 2);
  for (std::size_t i = 0; i < want.size(); ++i) want[i] += z[i];
  EXPECT_LE(max_abs_diff(out.value(), want), 1e-13);
  EXPECT_THROW(f.proj.stream_attention(Modality::one_d, 0), ConfigError);
}

TEST(CoAttention, ZeroedRelationTablesReduceToPlainAttentionBitExact) {
  ProjFixture f;
  for (auto& p : f.store.all())
    if (p.name == "coproj.spd_table" || p.name.rfind("coproj.phi3d_mlp.", 0) == 0)
      p.var.mutable_value() = Tensor(p.var.shape());
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Molecule mol = generate_synthetic(100 + trial, 1, 10).front();
    const std::size_t n = mol.atom_count();
    ProjectorInputs in;
    const auto sm = struct_matrices(mol);
    in.spd = &sm.spd;
    in.dist = &*sm.dist;
    const Var bias = f.proj.relation_bias(in, ModalityMask());
    const Var z = constant(random_tensor({n, 4}, rng));
    for (Modality m : {Modality::two_d, Modality::three_d}) {
      const auto& w = f.proj.stream_attention(m, 0);
      EXPECT_EQ(co_attention_block(z, bias, w, 2).value(), co_attention_block(z, {}, w, 2).value());
    }
  }
}

TEST(Unify, EmptyKeysGiveZeroAndMatchesCrossAttention) {
  ProjFixture f;
  Rng rng(8);
  const Var q = constant(random_tensor({3, 8}, rng));
  const Var empty = constant(Tensor({0, 8}));
  const Var streams0[] = {empty};
  EXPECT_EQ(unify_layer(q, streams0, f.proj.unify_attention(0), 2).value(), Tensor({3, 8}));
  EXPECT_THROW(unify_layer(q, std::span<const Var>(), f.proj.unify_attention(0), 2), ShapeError);

  const Tensor a = random_tensor({2, 8}, rng), b = random_tensor({4, 8}, rng);
  const Var streams[] = {constant(a), constant(b)};
  Tensor keys({6, 8});
  for (std::size_t i = 0; i < 16; ++i) keys[i] = a[i];
  for (std::size_t i = 0; i < 32; ++i) keys[16 + i] = b[i];
  EXPECT_LE(max_abs_diff(unify_layer(q, streams, f.proj.unify_attention(1), 2).value(),
                         attention_oracle(q.value(), keys, keys, nullptr, f.proj.unify_attention(1), 2)),
            1e-13);
}

TEST(Projector, QueriesAddActiveModalityEmbeddings) {
  ProjFixture f;
  const auto mask = ModalityMask::parse("1d,3d");
  Tensor want = f.store.get("coproj.query.base.l1").var.value();
  const Tensor& e1 = f.store.get("coproj.query.1d.l1").var.value();
  const Tensor& e3 = f.store.get("coproj.query.3d.l1").var.value();
  for (std::size_t i = 0; i < want.size(); ++i) want[i] = want[i] + e1[i] + e3[i];
  EXPECT_EQ(f.proj.queries(1, mask).value(), want);
}

TEST(Projector, FixedShapeForEverySizeAndSubset) {
  ModelFixture fx;
  const std::size_t rows = fx.config.query_tokens * fx.config.enc_layers;
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 10; ++n) {
    const Molecule mol = chain_molecule(n, true, n);
    for (const auto& mask : ModalityMask::all_subsets()) {
      const auto out = fx.model.molecule_tokens(mol, mask);
      EXPECT_EQ(out.tokens.shape(), (Shape{rows, fx.config.d})) << n << " " << mask.to_string();
      EXPECT_TRUE(out.tokens.value().all_finite());
      ++cases;
    }
  }
  EXPECT_EQ(cases, 70u);
}

TEST(Projector, InvariantToAtomOrderAndRigidMotion) {
  ModelFixture fx;
  Rng rng(31);
  for (const auto& mol : generate_synthetic(7, 6, 10)) {
    const Tensor base = fx.model.molecule_tokens(mol, ModalityMask()).tokens.value();
    const Tensor phi = fx.model.projector().phi_3d(pairwise_distances(*mol.coords)).value();
    const auto perm = random_permutation(mol.atom_count(), rng);
    EXPECT_LE(max_abs_diff(fx.model.molecule_tokens(permute_atoms(mol, perm), ModalityMask())
                               .tokens.value(),
                           base),
              1e-9);
    Molecule moved = mol;
    const double t[3] = {-2.0, 0.5, 7.0};
    moved.coords = rigid_motion(*mol.coords, random_rotation(rng), t);
    EXPECT_LE(max_abs_diff(fx.model.molecule_tokens(moved, ModalityMask()).tokens.value(), base),
              1e-9);
    EXPECT_LE(max_abs_diff(fx.model.projector().phi_3d(pairwise_distances(*moved.coords)).value(),
                           phi),
              1e-9);
  }
}

TEST(Projector, MissingInputsAreReported) {
  ProjFixture f;
  ProjectorInputs in;
  EXPECT_THROW(f.proj.forward(in, ModalityMask::parse("2d")), ModalityUnavailable);
  ModelFixture fx;
  const Molecule flat = chain_molecule(4, false);
  EXPECT_EQ(fx.model.usable_mask(flat, ModalityMask()).bits(), 3u);
  EXPECT_THROW(fx.model.usable_mask(flat, ModalityMask::parse("3d")), ModalityUnavailable);
}

TEST(Projector, DisabledSwitchesDropBiasAndEmbeddings) {
  Rng rng(1);
  ParameterStore store;
  ProjectorConfig cfg;
  cfg.layers = 1;
  cfg.d1 = cfg.d2 = cfg.d3 = 4;
  cfg.d = 4;
  cfg.heads = 2;
  cfg.co_attention = false;
  cfg.modality_embedding = false;
  const auto proj = Projector::create(store, cfg, rng);
  const auto sm = struct_matrices(chain_molecule(3));
  ProjectorInputs in;
  in.spd = &sm.spd;
  in.dist = &*sm.dist;
  EXPECT_FALSE(static_cast<bool>(proj.relation_bias(in, ModalityMask())));
  EXPECT_EQ(proj.queries(0, ModalityMask()).value(),
            store.get("coproj.query.base.l0").var.value());
}
