// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "molproj/dataset.hpp"
#include "molproj/errors.hpp"
#include "molproj/molecule.hpp"
#include "molproj/selfies.hpp"
#include "molproj/synthetic.hpp"
#include "test_util.hpp"

using namespace molproj;
using molproj::testing::chain_molecule;
using molproj::testing::random_permutation;
using molproj::testing::source_path;

namespace {

// Floyd-Warshall over the bond list.
std::vector<int> floyd_warshall(const Molecule& mol) {
  const std::size_t n = mol.atom_count();
  const int inf = 1 << 20;
  std::vector<int> d(n * n, inf);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 0;
  for (const auto& b : mol.bonds) d[b.i * n + b.j] = d[b.j * n + b.i] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        d[i * n + j] = std::min(d[i * n + j], d[i * n + k] + d[k * n + j]);
  for (auto& v : d)
    if (v >= inf) v = kUnreachable;
  return d;
}

Molecule two_fragments() {
  Molecule m;
  m.id = "frag";
  m.atoms = {"C", "O", "N", "C"};
  m.bonds = {{0, 1, 1}, {2, 3, 2}};
  m.selfies = "[C][O][.][N][=C]";
  return m;
}

}  // namespace

TEST(Selfies, SplitAndJoinRoundTrip) {
  const auto syms = split_selfies("[C][=O][Branch1][Ring2]");
  ASSERT_EQ(syms.size(), 4u);
  EXPECT_EQ(syms[1], "[=O]");
  EXPECT_EQ(join_selfies(syms), "[C][=O][Branch1][Ring2]");
  EXPECT_TRUE(split_selfies("").empty());
}

TEST(Selfies, LexicalErrorsReportOffsets) {
  auto offset_of = [](const char* s) {
    try {
      split_selfies(s);
    } catch (const ParseError& e) {
      return static_cast<long>(e.offset());
    }
    return -1L;
  };
  EXPECT_EQ(offset_of("[C]x[O]"), 3);
  EXPECT_EQ(offset_of("[C][O"), 3);
  EXPECT_EQ(offset_of("[C[O]"), 2);
  EXPECT_EQ(offset_of("[C][]"), 3);
  EXPECT_EQ(offset_of("[C]]"), 3);
}

TEST(Selfies, VocabAssignsFirstSeenIds) {
  const std::vector<std::string> corpus = {"[C][O]", "[N][C][=O]"};
  const auto vocab = build_vocab(std::span<const std::string>(corpus));
  ASSERT_EQ(vocab.size(), 2u + 4u);
  EXPECT_EQ(vocab.symbol(SelfiesVocab::kPad), "<pad>");
  EXPECT_EQ(vocab.id("[C]"), 2u);
  EXPECT_EQ(vocab.id("[=O]"), 5u);
  EXPECT_EQ(vocab.id("[Cl]"), SelfiesVocab::kUnknown);
  const auto ids = tokenize_selfies("[N][Br][O]", vocab);
  EXPECT_EQ(ids, (std::vector<std::size_t>{4, 1, 3}));
  EXPECT_EQ(SelfiesVocab::from_symbols(vocab.symbols()), vocab);
}

TEST(Selfies, VocabErrorsNameTheSample) {
  const std::vector<std::string> corpus = {"[C]", "[C][O", "[N]"};
  try {
    build_vocab(std::span<const std::string>(corpus));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(build_vocab(std::span<const std::string>()), ConfigError);
}

TEST(Selfies, WriterIsLexicallyValidForSyntheticMolecules) {
  for (const auto& mol : generate_synthetic(4, 30, 10)) {
    const auto syms = split_selfies(mol.selfies);
    EXPECT_FALSE(syms.empty());
    EXPECT_EQ(join_selfies(syms), mol.selfies);
  }
}

TEST(Molecule, ValidateRejectsBrokenInvariants) {
  Molecule m = chain_molecule(4);
  EXPECT_NO_THROW(validate(m));
  Molecule bad = m;
  bad.bonds.push_back({0, 7, 1});
  EXPECT_THROW(validate(bad), ValidationError);
  bad = m;
  bad.bonds.push_back({2, 2, 1});
  EXPECT_THROW(validate(bad), ValidationError);
  bad = m;
  bad.bonds.push_back({1, 0, 1});
  EXPECT_THROW(validate(bad), ValidationError);
  bad = m;
  bad.coords = Tensor({3, 3});
  EXPECT_THROW(validate(bad), ValidationError);
  bad = m;
  (*bad.coords)(0, 0) = std::nan("");
  EXPECT_THROW(validate(bad), ValidationError);
  bad = m;
  bad.selfies = "[C";
  try {
    validate(bad);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(m.id), std::string::npos);
  }
}

TEST(Molecule, ShortestPathsMatchFloydWarshall) {
  auto mols = generate_synthetic(9, 25, 10);
  mols.push_back(two_fragments());
  for (const auto& mol : mols) {
    const auto spd = shortest_path_matrix(mol);
    ASSERT_EQ(spd.n, mol.atom_count());
    EXPECT_EQ(spd.hops, floyd_warshall(mol)) << mol.id;
  }
  EXPECT_EQ(shortest_path_matrix(two_fragments())(0, 2), kUnreachable);
}

TEST(Molecule, DistancesMatchScalarLoop) {
  const Molecule mol = chain_molecule(7);
  const Tensor& c = *mol.coords;
  const Tensor d = pairwise_distances(c);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      const double dx = c(i, 0) - c(j, 0), dy = c(i, 1) - c(j, 1), dz = c(i, 2) - c(j, 2);
      EXPECT_NEAR(d(i, j), std::sqrt(dx * dx + dy * dy + dz * dz), 1e-14);
      EXPECT_EQ(d(i, j), d(j, i));
    }
  EXPECT_THROW(pairwise_distances(Tensor({3, 2})), ShapeError);
  EXPECT_FALSE(struct_matrices(chain_molecule(3, false)).dist.has_value());
}

TEST(Molecule, RingCount) {
  EXPECT_EQ(ring_count(chain_molecule(5)), 0u);
  Molecule ring = chain_molecule(6);
  ring.bonds.push_back({5, 0, 1});
  EXPECT_EQ(ring_count(ring), 1u);
  ring.bonds.push_back({1, 4, 1});
  EXPECT_EQ(ring_count(ring), 2u);
  EXPECT_EQ(ring_count(two_fragments()), 0u);
}

TEST(Molecule, PermuteAtomsRelabelsEverything) {
  Rng rng(3);
  const Molecule mol = generate_synthetic(2, 1, 8).front();
  const auto perm = random_permutation(mol.atom_count(), rng);
  const Molecule p = permute_atoms(mol, perm);
  EXPECT_EQ(p.selfies, mol.selfies);
  const auto a = shortest_path_matrix(mol), b = shortest_path_matrix(p);
  for (std::size_t i = 0; i < mol.atom_count(); ++i) {
    EXPECT_EQ(p.atoms[perm[i]], mol.atoms[i]);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ((*p.coords)(perm[i], k), (*mol.coords)(i, k));
    for (std::size_t j = 0; j < mol.atom_count(); ++j) EXPECT_EQ(b(perm[i], perm[j]), a(i, j));
  }
  const std::size_t dup[] = {0, 0};
  EXPECT_THROW(permute_atoms(chain_molecule(2), dup), ShapeError);
}

TEST(Jsonl, RecordRoundTrip) {
  for (const auto& mol : generate_synthetic(5, 10, 9)) {
    const std::string line = molecule_to_json(mol);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    const Molecule back = molecule_from_json(line);
    EXPECT_EQ(back, mol);
    EXPECT_EQ(molecule_to_json(back), line);
  }
  Molecule bare;
  bare.id = "bare";
  bare.selfies = "[C]";
  bare.atoms = {"C"};
  const std::string line = molecule_to_json(bare);
  EXPECT_EQ(line.find("coords"), std::string::npos);
  EXPECT_EQ(line.find("caption"), std::string::npos);
  EXPECT_EQ(molecule_from_json(line), bare);
}

TEST(Jsonl, ErrorsAreTyped) {
  EXPECT_THROW(molecule_from_json("{\"id\": "), ParseError);
  EXPECT_THROW(molecule_from_json("[1,2]"), ValidationError);
  EXPECT_THROW(molecule_from_json(R"({"id":"x","selfies":"[C]"})"), ValidationError);
  EXPECT_THROW(
      molecule_from_json(R"({"id":"x","selfies":"[C]","atoms":["C"],"bonds":[[0,-1]]})"),
      ValidationError);
}

TEST(Jsonl, SkipInvalidCollectsRejections) {
  const auto mols = generate_synthetic(1, 3, 6);
  std::ostringstream text;
  text << molecule_to_json(mols[0]) << "\n"
       << "{not json\n"
       << "\n"
       << molecule_to_json(mols[1]) << "\n"
       << R"({"id":"bad-bond","selfies":"[C]","atoms":["C"],"bonds":[[0,3,1]]})" << "\n"
       << molecule_to_json(mols[2]) << "\n";

  std::istringstream strict(text.str());
  try {
    read_jsonl(strict);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
  }

  std::istringstream lenient(text.str());
  const auto r = read_jsonl(lenient, {.skip_invalid = true});
  ASSERT_EQ(r.molecules.size(), 3u);
  ASSERT_EQ(r.rejected.size(), 2u);
  EXPECT_EQ(r.rejected[0].line, 2u);
  EXPECT_EQ(r.rejected[1].line, 5u);
  EXPECT_EQ(r.rejected[1].id, "bad-bond");
}

TEST(Jsonl, BundledDatasetIsAFixpoint) {
  const auto path = source_path("data/molecules.jsonl");
  const auto r = load_dataset(path);
  ASSERT_EQ(r.molecules.size(), 64u);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream original;
  original << in.rdbuf();
  std::ostringstream rewritten;
  write_jsonl(rewritten, r.molecules);
  EXPECT_EQ(rewritten.str(), original.str());
  EXPECT_THROW(load_dataset(path, "sdf"), ConfigError);
}

TEST(Xyz, ParseAndMerge) {
  auto mols = generate_synthetic(6, 2, 4);
  for (auto& m : mols) m.coords.reset();
  std::ostringstream xyz;
  for (const auto& m : mols) {
    xyz << m.atom_count() << "\n" << m.id << " relaxed\n";
    for (std::size_t i = 0; i < m.atom_count(); ++i)
      xyz << m.atoms[i] << " " << 0.5 * static_cast<double>(i) << " 0 " << -1.25 << "\n";
  }
  std::istringstream in(xyz.str());
  const auto frames = read_xyz(in);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(merge_xyz(mols, frames), 2u);
  EXPECT_EQ((*mols[1].coords)(1, 0), 0.5);
  EXPECT_EQ((*mols[1].coords)(0, 2), -1.25);

  auto mismatch = frames;
  mismatch[0].elements[0] = "Xe";
  EXPECT_THROW(merge_xyz(mols, mismatch), ValidationError);
  auto orphan = frames;
  orphan[0].comment = "nobody";
  EXPECT_THROW(merge_xyz(mols, orphan), ValidationError);

  std::istringstream truncated("3\ncomment\nC 0 0 0\n");
  EXPECT_THROW(read_xyz(truncated), ParseError);
  std::istringstream garbage("three\n");
  EXPECT_THROW(read_xyz(garbage), ParseError);
}

TEST(Synthetic, DeterministicAndValid) {
  const auto a = generate_synthetic(11, 20, 10), b = generate_synthetic(11, 20, 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(generate_synthetic(12, 20, 10), a);
  for (const auto& m : a) {
    EXPECT_NO_THROW(validate(m));
    EXPECT_GE(m.atom_count(), 2u);
    EXPECT_LE(m.atom_count(), 10u);
    ASSERT_TRUE(m.has_coords());
    ASSERT_TRUE(m.caption.has_value());
    EXPECT_EQ(m.properties.at("ring_count"), static_cast<double>(ring_count(m)));
    EXPECT_EQ(m.properties.at("atom_count"), static_cast<double>(m.atom_count()));
    // bonded atoms sit near unit distance
    const Tensor d = pairwise_distances(*m.coords);
    for (const auto& bnd : m.bonds) {
      EXPECT_GT(d(bnd.i, bnd.j), 0.5);
      EXPECT_LT(d(bnd.i, bnd.j), 1.6);
    }
  }
}
