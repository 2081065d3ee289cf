// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "molproj/molecule.hpp"

namespace molproj {

struct LoadOptions {
  /// Drop invalid records (reported in LoadResult::rejected) instead of
  /// failing the whole load.
  bool skip_invalid = false;
};

struct LoadIssue {
  std::size_t line = 0;  // 1-based
  std::string id;        // empty when the record had no readable id
  std::string message;
};

struct LoadResult {
  std::vector<Molecule> molecules;
  std::vector<LoadIssue> rejected;
};

/// Parses one JSON record; throws ParseError / ValidationError.
Molecule molecule_from_json(const std::string& line);
/// Single-line JSON with keys in record order; optional fields omitted when
/// absent.
std::string molecule_to_json(const Molecule& mol);

/// Reads JSON-lines records. Without skip_invalid, any bad record aborts with
/// a ValidationError listing every offending line.
LoadResult read_jsonl(std::istream& in, const LoadOptions& options = {});
LoadResult load_dataset(const std::filesystem::path& path,
                        const std::string& format = "jsonl",
                        const LoadOptions& options = {});

void write_jsonl(std::ostream& out, const std::vector<Molecule>& molecules);
void save_dataset(const std::filesystem::path& path,
                  const std::vector<Molecule>& molecules);

struct XyzFrame {
  std::string comment;  // first whitespace-separated word is the record id
  std::vector<std::string> elements;
  Tensor coords;  // n x 3
};

std::vector<XyzFrame> read_xyz(std::istream& in);

/// Copies coordinates from XYZ frames onto the records with matching ids.
/// Element symbols must agree atom by atom; merged records are re-validated.
/// Returns the number of records updated.
std::size_t merge_xyz(std::vector<Molecule>& molecules,
                      const std::vector<XyzFrame>& frames);

}  // namespace molproj
