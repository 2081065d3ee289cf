// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "molproj/encoders.hpp"
#include "molproj/errors.hpp"
#include "molproj/optim.hpp"
#include "test_util.hpp"

using namespace molproj;
using namespace molproj::testing;

namespace {

using Rows = std::vector<std::vector<double>>;

std::vector<double> scalar_linear(const std::vector<double>& x, const Linear& lin) {
  const Tensor& w = lin.weight.value();
  std::vector<double> y(w.cols(), 0.0);
  for (std::size_t o = 0; o < w.cols(); ++o) {
    double s = lin.bias ? lin.bias.value()[o] : 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) s += x[i] * w(i, o);
    y[o] = s;
  }
  return y;
}

std::vector<double> scalar_mlp(std::vector<double> x, const Mlp& mlp) {
  const auto& layers = mlp.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = scalar_linear(x, layers[l]);
    if (l + 1 < layers.size())
      for (double& v : x) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  }
  return x;
}

Rows element_rows(const Var& table, const Molecule& mol) {
  Rows h;
  for (const auto& a : mol.atoms) {
    const std::size_t r = element_index(a);
    std::vector<double> row(table.cols());
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = table.value()(r, c);
    h.push_back(row);
  }
  return h;
}

Rows gin_oracle(const GraphEncoder& enc, const Molecule& mol) {
  Rows h = element_rows(enc.element_table(), mol);
  const std::size_t n = h.size(), d = h[0].size();
  for (std::size_t l = 0; l < enc.rounds().size(); ++l) {
    const double eps = enc.eps()[l].value()[0];
    Rows next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> pre(d);
      for (std::size_t c = 0; c < d; ++c) pre[c] = (1.0 + eps) * h[i][c];
      for (const auto& b : mol.bonds) {
        if (b.i == i)
          for (std::size_t c = 0; c < d; ++c) pre[c] += h[b.j][c];
        if (b.j == i)
          for (std::size_t c = 0; c < d; ++c) pre[c] += h[b.i][c];
      }
      next[i] = scalar_mlp(pre, enc.rounds()[l]);
    }
    h = next;
  }
  return h;
}

Rows conformer_oracle(const ConformerEncoder& enc, const Molecule& mol) {
  Rows h = element_rows(enc.element_table(), mol);
  const Tensor& x = *mol.coords;
  const std::size_t n = h.size(), d = h[0].size();
  for (const auto& round : enc.rounds()) {
    Rows next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> pre = h[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        double d2 = 0.0;
        for (std::size_t a = 0; a < 3; ++a) d2 += (x(i, a) - x(j, a)) * (x(i, a) - x(j, a));
        const double w = std::exp(-d2 / enc.tau());
        for (std::size_t c = 0; c < d; ++c) pre[c] += w * h[j][c];
      }
      next[i] = scalar_mlp(pre, round);
    }
    h = next;
  }
  return h;
}

void expect_rows_near(const Tensor& got, const Rows& want, double tol) {
  ASSERT_EQ(got.rows(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i)
    for (std::size_t c = 0; c < want[i].size(); ++c)
      EXPECT_NEAR(got(i, c), want[i][c], tol) << "row " << i << " col " << c;
}

struct Fixture {
  ParameterStore store;
  Encoders enc;
  explicit Fixture(std::uint64_t seed = 1, std::size_t layers = 3) {
    Rng rng(seed);
    EncoderConfig cfg;
    cfg.layers = layers;
    cfg.d1 = 6;
    cfg.d2 = 5;
    cfg.d3 = 4;
    cfg.tau = 2.5;
    enc = Encoders::create(store, cfg, 12, rng);
    // Nonzero eps so the self term is exercised.
    for (std::size_t l = 0; l < layers; ++l)
      store.get("encoder.2d.round" + std::to_string(l) + ".eps").var.mutable_value()[0] =
          0.1 * static_cast<double>(l + 1);
  }
};

}  // namespace

TEST(Encoders, ModalityNames) {
  for (Modality m : kAllModalities) EXPECT_EQ(parse_modality(modality_name(m)), m);
  EXPECT_THROW(parse_modality("4d"), ConfigError);
  EXPECT_EQ(element_index("C"), 1u);
  EXPECT_EQ(element_index("Zz"), element_vocab_size() - 1);
}

TEST(Encoders, ParameterNamesAndCounts) {
  Fixture f;
  EXPECT_TRUE(f.store.contains("encoder.1d.embedding"));
  EXPECT_TRUE(f.store.contains("encoder.2d.round2.mlp.fc1.weight"));
  EXPECT_TRUE(f.store.contains("encoder.3d.round0.mlp.fc0.bias"));
  EXPECT_EQ(f.store.get("encoder.1d.embedding").var.shape(), (Shape{12, 6}));
  ParameterStore s;
  Rng rng(0);
  EncoderConfig bad;
  bad.tau = 0.0;
  EXPECT_THROW(Encoders::create(s, bad, 4, rng), ConfigError);
}

TEST(Encoders, TokenEmbedderLooksUpRows) {
  Fixture f;
  const std::size_t ids[] = {3, 0, 11};
  const auto hs = f.enc.one_d.embed(ids);
  ASSERT_EQ(hs.layers.size(), 3u);
  for (const auto& layer : hs.layers) {
    EXPECT_EQ(layer.shape(), (Shape{3, 6}));
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(layer.value()(2, c), f.enc.one_d.table().value()(11, c));
  }
  const std::size_t bad[] = {12};
  EXPECT_THROW(f.enc.one_d.embed(bad), ShapeError);
}

TEST(Encoders, NeighborSumMatchesScalarLoop) {
  Rng rng(4);
  const Tensor h = random_tensor({4, 3}, rng);
  const std::vector<std::vector<std::size_t>> adj = {{1, 2}, {0}, {0, 3}, {2}};
  const Var out = neighbor_sum(constant(h), adj);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(out.value()(0, c), h(1, c) + h(2, c), 1e-15);
    EXPECT_EQ(out.value()(1, c), h(0, c));
    EXPECT_EQ(out.value()(3, c), h(2, c));
  }
  EXPECT_THROW(neighbor_sum(constant(h), {{}, {}}), ShapeError);

  Var x = variable(h);
  backward(sum(neighbor_sum(x, adj)));
  // d/dh_j = degree of j
  EXPECT_EQ(x.grad()(0, 0), 2.0);
  EXPECT_EQ(x.grad()(2, 1), 2.0);
  EXPECT_EQ(x.grad()(3, 2), 1.0);
}

TEST(Encoders, GraphEncoderMatchesScalarGin) {
  Fixture f;
  for (const auto& mol : generate_synthetic(21, 6, 8)) {
    const auto hs = f.enc.two_d.encode(mol);
    ASSERT_EQ(hs.layers.size(), 3u);
    expect_rows_near(hs.layers.back().value(), gin_oracle(f.enc.two_d, mol), 1e-12);
  }
}

TEST(Encoders, ConformerEncoderMatchesScalarLoop) {
  Fixture f;
  for (const auto& mol : generate_synthetic(22, 6, 8)) {
    const auto hs = f.enc.three_d.encode(mol);
    expect_rows_near(hs.layers.back().value(), conformer_oracle(f.enc.three_d, mol), 1e-12);
  }
}

TEST(Encoders, ConformerNeedsCoordinates) {
  Fixture f;
  EXPECT_THROW(f.enc.three_d.encode(chain_molecule(3, false)), ModalityUnavailable);
}

TEST(Encoders, GraphEncoderIsPermutationEquivariant) {
  Fixture f;
  Rng rng(8);
  for (const auto& mol : generate_synthetic(23, 5, 10)) {
    const auto perm = random_permutation(mol.atom_count(), rng);
    const Molecule p = permute_atoms(mol, perm);
    const auto a = f.enc.two_d.encode(mol), b = f.enc.two_d.encode(p);
    for (std::size_t l = 0; l < a.layers.size(); ++l)
      for (std::size_t i = 0; i < mol.atom_count(); ++i)
        for (std::size_t c = 0; c < 5; ++c)
          EXPECT_EQ(b.layers[l].value()(perm[i], c), a.layers[l].value()(i, c));
  }
}

TEST(Encoders, ConformerEncoderIsRigidAndPermutationInvariant) {
  Fixture f;
  Rng rng(9);
  for (const auto& mol : generate_synthetic(24, 5, 10)) {
    const auto base = f.enc.three_d.encode(mol).layers.back().value();
    Molecule moved = mol;
    const double t[3] = {3.0, -1.5, 0.25};
    moved.coords = rigid_motion(*mol.coords, random_rotation(rng), t);
    EXPECT_LE(max_abs_diff(f.enc.three_d.encode(moved).layers.back().value(), base), 1e-9);

    const auto perm = random_permutation(mol.atom_count(), rng);
    const auto permuted = f.enc.three_d.encode(permute_atoms(mol, perm)).layers.back().value();
    for (std::size_t i = 0; i < mol.atom_count(); ++i)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(permuted(perm[i], c), base(i, c), 1e-12);
  }
}

TEST(Encoders, GradientsMatchFiniteDifferences) {
  Fixture f(2, 2);
  const Molecule mol = generate_synthetic(25, 1, 5).front();
  auto loss = [&]() {
    return add(mean(f.enc.two_d.encode(mol).layers.back()),
               mean(f.enc.three_d.encode(mol).layers.back()));
  };
  std::vector<Parameter> params;
  for (const auto& p : f.store.all())
    if (p.name.rfind("encoder.1d", 0) != 0) params.push_back(p);
  GradcheckOptions opts;
  opts.extrapolate = true;
  opts.step = 1e-3;
  for (const auto& r : gradcheck(loss, params, opts)) {
    EXPECT_LE(r.max_rel_error, 1e-6) << r.parameter;
  }
}
