// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <variant>

#include "molproj/errors.hpp"

namespace molproj {

namespace {

// Seeds are stored as std::uint64_t and sizes as std::size_t; the table
// treats both as one unsigned integer kind.
static_assert(std::is_same_v<std::uint64_t, std::size_t>,
              "config field table assumes a 64-bit size_t");

using Field = std::variant<std::size_t RunConfig::*, double RunConfig::*, bool RunConfig::*, std::string RunConfig::*,
                           std::vector<std::string> RunConfig::*>;

struct Key {
  const char* name;
  Field field;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      {"seed", &RunConfig::seed},
      {"enc_layers", &RunConfig::enc_layers},
      {"d1", &RunConfig::d1},
      {"d2", &RunConfig::d2},
      {"d3", &RunConfig::d3},
      {"tau", &RunConfig::tau},
      {"d", &RunConfig::d},
      {"query_tokens", &RunConfig::query_tokens},
      {"heads", &RunConfig::heads},
      {"kernels", &RunConfig::kernels},
      {"spd_max", &RunConfig::spd_max},
      {"p_drop", &RunConfig::p_drop},
      {"co_attention", &RunConfig::co_attention},
      {"modality_embedding", &RunConfig::modality_embedding},
      {"lm_blocks", &RunConfig::lm_blocks},
      {"lm_heads", &RunConfig::lm_heads},
      {"lm_max_seq", &RunConfig::lm_max_seq},
      {"lora_rank", &RunConfig::lora_rank},
      {"lora_alpha", &RunConfig::lora_alpha},
      {"lora_targets", &RunConfig::lora_targets},
      {"lr", &RunConfig::lr},
      {"beta1", &RunConfig::beta1},
      {"beta2", &RunConfig::beta2},
      {"eps", &RunConfig::eps},
      {"weight_decay", &RunConfig::weight_decay},
      {"batch_size", &RunConfig::batch_size},
      {"pretrain_steps", &RunConfig::pretrain_steps},
      {"pretrain_lr", &RunConfig::pretrain_lr},
      {"steps", &RunConfig::steps},
      {"stage2_steps", &RunConfig::stage2_steps},
      {"train_path", &RunConfig::train_path},
      {"val_path", &RunConfig::val_path},
      {"data_seed", &RunConfig::data_seed},
      {"train_count", &RunConfig::train_count},
      {"val_count", &RunConfig::val_count},
      {"max_atoms", &RunConfig::max_atoms},
      {"gazetteer_path", &RunConfig::gazetteer_path},
      {"checkpoint_dir", &RunConfig::checkpoint_dir},
      {"report_dir", &RunConfig::report_dir},
      {"modalities", &RunConfig::modalities},
  };
  return k;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(const std::string& v, const std::string& where) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& v, const std::string& where) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0.0;
  char extra = 0;
  if (!(in >> out) || (in >> extra)) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(where + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "config line " + std::to_string(lineno);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    const Key* spec = nullptr;
    for (const auto& k : keys())
      if (key == k.name) spec = &k;
    if (!spec) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' repeated");
    const std::string ctx = where + " (" + key + ")";
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(cfg.*member)>;
          if constexpr (std::is_same_v<T, std::size_t>) {
            cfg.*member = parse_integer<T>(value, ctx);
          } else if constexpr (std::is_same_v<T, double>) {
            cfg.*member = parse_double(value, ctx);
          } else if constexpr (std::is_same_v<T, bool>) {
            cfg.*member = parse_bool(value, ctx);
          } else if constexpr (std::is_same_v<T, std::string>) {
            cfg.*member = value;
          } else {
            cfg.*member = parse_list(value);
          }
        },
        spec->field);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& k : keys()) {
    out += k.name;
    out += " = ";
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<T, std::size_t>) {
            out += std::to_string(this->*member);
          } else if constexpr (std::is_same_v<T, double>) {
            out += format_double(this->*member);
          } else if constexpr (std::is_same_v<T, bool>) {
            out += (this->*member) ? "true" : "false";
          } else if constexpr (std::is_same_v<T, std::string>) {
            out += this->*member;
          } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            const auto& list = this->*member;
            for (std::size_t i = 0; i < list.size(); ++i) out += (i ? "," : "") + list[i];
          }
        },
        k.field);
    out += '\n';
  }
  return out;
}

void RunConfig::validate() const {
  const std::pair<const char*, std::size_t> dims[] = {
      {"enc_layers", enc_layers}, {"d1", d1},           {"d2", d2},
      {"d3", d3},                 {"d", d},             {"query_tokens", query_tokens},
      {"heads", heads},           {"kernels", kernels}, {"lm_blocks", lm_blocks},
      {"lm_heads", lm_heads},     {"lm_max_seq", lm_max_seq}, {"lora_rank", lora_rank},
      {"batch_size", batch_size}, {"max_atoms", max_atoms}};
  for (const auto& [name, v] : dims)
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  if (!(p_drop >= 0.0 && p_drop < 1.0)) throw ConfigError("p_drop must be in [0, 1)");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(lr > 0.0) || !(pretrain_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must be in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  for (const auto& [name, width] :
       {std::pair{"d", d}, std::pair{"d2", d2}, std::pair{"d3", d3}}) {
    if (width % heads != 0) {
      throw ConfigError(std::string(name) + " = " + std::to_string(width) +
                        " is not divisible by heads = " + std::to_string(heads));
    }
  }
  if (d % lm_heads != 0) throw ConfigError("d must be divisible by lm_heads");
  if (query_tokens * enc_layers >= lm_max_seq) {
    throw ConfigError("query_tokens * enc_layers must be below lm_max_seq");
  }
  if (lora_targets.empty()) throw ConfigError("lora_targets must not be empty");
  if (max_atoms < 2) throw ConfigError("max_atoms must be at least 2");
  (void)ModalityMask::parse(modalities);
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.encoder.layers = enc_layers;
  m.encoder.d1 = d1;
  m.encoder.d2 = d2;
  m.encoder.d3 = d3;
  m.encoder.tau = tau;
  m.projector.layers = enc_layers;
  m.projector.d1 = d1;
  m.projector.d2 = d2;
  m.projector.d3 = d3;
  m.projector.d = d;
  m.projector.query_tokens = query_tokens;
  m.projector.heads = heads;
  m.projector.kernels = kernels;
  m.projector.spd_max = spd_max;
  m.projector.co_attention = co_attention;
  m.projector.modality_embedding = modality_embedding;
  m.lm.width = d;
  m.lm.blocks = lm_blocks;
  m.lm.heads = lm_heads;
  m.lm.max_seq = lm_max_seq;
  m.lora.rank = lora_rank;
  m.lora.alpha = lora_alpha;
  m.lora.targets = lora_targets;
  return m;
}

AdamConfig RunConfig::adam() const {
  AdamConfig a;
  a.lr = lr;
  a.beta1 = beta1;
  a.beta2 = beta2;
  a.eps = eps;
  a.weight_decay = weight_decay;
  return a;
}

}  // namespace molproj
