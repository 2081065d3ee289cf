// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "molproj/errors.hpp"

namespace molproj {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const json& require_field(const json& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end()) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  return *it;
}

}  // namespace

Molecule molecule_from_json(const std::string& line) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
  }
  if (!rec.is_object()) throw ValidationError("record is not a JSON object");

  Molecule mol;
  try {
    mol.id = require_field(rec, "id").get<std::string>();
    mol.selfies = require_field(rec, "selfies").get<std::string>();
    mol.atoms = require_field(rec, "atoms").get<std::vector<std::string>>();
    for (const auto& b : require_field(rec, "bonds")) {
      if (!b.is_array() || b.size() < 2 || b.size() > 3) {
        throw ValidationError("bond entries must be [i, j] or [i, j, order]");
      }
      const auto i = b[0].get<long long>();
      const auto j = b[1].get<long long>();
      if (i < 0 || j < 0) throw ValidationError("negative bond endpoint");
      mol.bonds.push_back({static_cast<std::size_t>(i),
                           static_cast<std::size_t>(j),
                           b.size() == 3 ? b[2].get<int>() : 1});
    }
    if (auto it = rec.find("coords"); it != rec.end() && !it->is_null()) {
      std::vector<double> flat;
      for (const auto& row : *it) {
        if (!row.is_array() || row.size() != 3) {
          throw ValidationError("coordinate rows must have 3 entries");
        }
        for (const auto& v : row) flat.push_back(v.get<double>());
      }
      const std::size_t n = flat.size() / 3;
      mol.coords = Tensor({n, 3}, std::move(flat));
    }
    if (auto it = rec.find("caption"); it != rec.end() && !it->is_null()) {
      mol.caption = it->get<std::string>();
    }
    if (auto it = rec.find("properties"); it != rec.end() && !it->is_null()) {
      for (const auto& [k, v] : it->items()) mol.properties[k] = v.get<double>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad field type: ") + e.what());
  }
  validate(mol);
  return mol;
}

std::string molecule_to_json(const Molecule& mol) {
  ordered_json rec;
  rec["id"] = mol.id;
  rec["selfies"] = mol.selfies;
  rec["atoms"] = mol.atoms;
  ordered_json bonds = ordered_json::array();
  for (const auto& b : mol.bonds) bonds.push_back({b.i, b.j, b.order});
  rec["bonds"] = std::move(bonds);
  if (mol.coords) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < mol.coords->rows(); ++i) {
      rows.push_back({(*mol.coords)(i, 0), (*mol.coords)(i, 1),
                      (*mol.coords)(i, 2)});
    }
    rec["coords"] = std::move(rows);
  }
  if (mol.caption) rec["caption"] = *mol.caption;
  if (!mol.properties.empty()) {
    ordered_json props = ordered_json::object();
    for (const auto& [k, v] : mol.properties) props[k] = v;
    rec["properties"] = std::move(props);
  }
  return rec.dump();
}

LoadResult read_jsonl(std::istream& in, const LoadOptions& options) {
  LoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      result.molecules.push_back(molecule_from_json(line));
    } catch (const std::exception& e) {
      std::string id;
      try {
        const json rec = json::parse(line);
        if (rec.is_object() && rec.contains("id") && rec["id"].is_string())
          id = rec["id"].get<std::string>();
      } catch (const json::exception&) {
      }
      result.rejected.push_back({lineno, id, e.what()});
    }
  }
  if (!result.rejected.empty() && !options.skip_invalid) {
    std::ostringstream msg;
    msg << result.rejected.size() << " invalid record(s):";
    for (const auto& issue : result.rejected) {
      msg << "\n  line " << issue.line;
      if (!issue.id.empty()) msg << " (id '" << issue.id << "')";
      msg << ": " << issue.message;
    }
    throw ValidationError(msg.str());
  }
  return result;
}

LoadResult load_dataset(const std::filesystem::path& path,
                        const std::string& format,
                        const LoadOptions& options) {
  if (format != "jsonl") {
    throw ConfigError("unsupported dataset format '" + format + "'");
  }
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return read_jsonl(in, options);
}

void write_jsonl(std::ostream& out, const std::vector<Molecule>& molecules) {
  for (const auto& mol : molecules) out << molecule_to_json(mol) << '\n';
}

void save_dataset(const std::filesystem::path& path,
                  const std::vector<Molecule>& molecules) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write dataset " + path.string());
  write_jsonl(out, molecules);
}

std::vector<XyzFrame> read_xyz(std::istream& in) {
  std::vector<XyzFrame> frames;
  std::string line;
  std::size_t offset = 0;
  auto next_line = [&](std::string& out) {
    if (!std::getline(in, out)) return false;
    offset += out.size() + 1;
    return true;
  };
  while (next_line(line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::size_t count = 0;
    try {
      count = std::stoul(line);
    } catch (const std::exception&) {
      throw ParseError("xyz: expected atom count, got '" + line + "'", offset);
    }
    XyzFrame frame;
    if (!next_line(frame.comment)) {
      throw ParseError("xyz: missing comment line", offset);
    }
    std::vector<double> flat;
    for (std::size_t k = 0; k < count; ++k) {
      if (!next_line(line)) throw ParseError("xyz: truncated frame", offset);
      std::istringstream row(line);
      std::string el;
      double x, y, z;
      if (!(row >> el >> x >> y >> z)) {
        throw ParseError("xyz: bad atom row '" + line + "'", offset);
      }
      frame.elements.push_back(el);
      flat.insert(flat.end(), {x, y, z});
    }
    frame.coords = Tensor({count, 3}, std::move(flat));
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::size_t merge_xyz(std::vector<Molecule>& molecules,
                      const std::vector<XyzFrame>& frames) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < molecules.size(); ++i) by_id[molecules[i].id] = i;
  std::size_t merged = 0;
  for (const auto& frame : frames) {
    std::istringstream words(frame.comment);
    std::string id;
    words >> id;
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw ValidationError("xyz frame '" + id + "' has no matching record");
    }
    Molecule& mol = molecules[it->second];
    if (frame.elements != mol.atoms) {
      throw ValidationError("molecule '" + id +
                            "': xyz elements do not match the atom list");
    }
    mol.coords = frame.coords;
    validate(mol);
    ++merged;
  }
  return merged;
}

}  // namespace molproj
