// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <regex>
#include <thread>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "molproj/errors.hpp"

namespace molproj {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::map<std::vector<std::string>, std::size_t> ngram_counts(const TokenList& tokens,
                                                             std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gazetteer and entity extraction

void EntityGazetteer::add(std::string_view term, double confidence,
                          std::string_view canonical) {
  std::string key = normalize_text(term);
  if (key.empty()) throw ValidationError("gazetteer term is empty");
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw ValidationError("gazetteer confidence for '" + key + "' outside [0, 1]");
  }
  Entry e{canonical.empty() ? key : normalize_text(canonical), confidence};
  longest_ = std::max(longest_, key.size());
  entries_[std::move(key)] = std::move(e);
}

EntityGazetteer EntityGazetteer::parse(std::istream& in) {
  EntityGazetteer g;
  std::string line;
  std::size_t lineno = 0, offset = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::istringstream fields(line);
    std::string col;
    while (std::getline(fields, col, '\t')) cols.push_back(col);
    double confidence = 1.0;
    if (cols.size() >= 2 && !cols[1].empty()) {
      char* end = nullptr;
      confidence = std::strtod(cols[1].c_str(), &end);
      if (end == cols[1].c_str() || *end != '\0') {
        throw ParseError("gazetteer line " + std::to_string(lineno) +
                             ": bad confidence '" + cols[1] + "'",
                         line_offset);
      }
    }
    g.add(cols[0], confidence, cols.size() >= 3 ? cols[2] : std::string{});
  }
  return g;
}

EntityGazetteer EntityGazetteer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open gazetteer " + path.string());
  return parse(in);
}

const EntityGazetteer::Entry* EntityGazetteer::find(std::string_view normalized_term) const {
  auto it = entries_.find(std::string(normalized_term));
  return it == entries_.end() ? nullptr : &it->second;
}

EntitySet extract_entities(std::string_view text, const EntityGazetteer& gazetteer,
                           double threshold) {
  const std::string s = normalize_text(text);
  EntitySet out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_char(s[i]) || (i > 0 && is_word_char(s[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t matched = 0;
    const EntityGazetteer::Entry* entry = nullptr;
    for (std::size_t len = std::min(gazetteer.longest_term(), s.size() - i); len > 0; --len) {
      const std::size_t end = i + len;
      if (end < s.size() && is_word_char(s[end]) && is_word_char(s[end - 1])) continue;
      if (const auto* e = gazetteer.find(std::string_view(s).substr(i, len))) {
        matched = len;
        entry = e;
        break;
      }
    }
    if (entry) {
      if (entry->confidence >= threshold) out.insert(entry->canonical);
      i += matched;
    } else {
      ++i;
    }
  }
  return out;
}

double charm(const EntitySet& predicted, const EntitySet& groundtruth) {
  if (predicted.empty()) {
    spdlog::debug("charm: no predicted entities, returning 0");
    return 0.0;
  }
  std::size_t hallucinated = 0;
  for (const auto& e : predicted) hallucinated += groundtruth.count(e) == 0;
  return static_cast<double>(hallucinated) / static_cast<double>(predicted.size());
}

double rcharm(const EntitySet& predicted, const EntitySet& groundtruth) {
  if (groundtruth.empty()) {
    spdlog::debug("rcharm: no ground-truth entities, returning 0");
    return 0.0;
  }
  std::size_t missed = 0;
  for (const auto& e : groundtruth) missed += predicted.count(e) == 0;
  return static_cast<double>(missed) / static_cast<double>(groundtruth.size());
}

// ---------------------------------------------------------------------------
// BLEU

TokenList bleu_tokens(std::string_view text) {
  std::istringstream in(normalize_text(text));
  TokenList out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

double bleu(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references,
            std::size_t max_n) {
  if (candidates.empty()) throw ValidationError("bleu: empty corpus");
  if (candidates.size() != references.size()) {
    throw ValidationError("bleu: " + std::to_string(candidates.size()) + " candidates vs " +
                          std::to_string(references.size()) + " references");
  }
  if (max_n == 0) throw ValidationError("bleu: max_n must be positive");
  std::vector<double> matches(max_n, 0.0), totals(max_n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    cand_len += static_cast<double>(candidates[s].size());
    ref_len += static_cast<double>(references[s].size());
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto cand = ngram_counts(candidates[s], n);
      const auto ref = ngram_counts(references[s], n);
      for (const auto& [gram, count] : cand) {
        totals[n - 1] += static_cast<double>(count);
        auto it = ref.find(gram);
        if (it != ref.end()) matches[n - 1] += static_cast<double>(std::min(count, it->second));
      }
    }
  }
  if (matches[0] == 0.0 || cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    const double p = matches[n] > 0.0 ? matches[n] / totals[n] : 1.0 / (totals[n] + 1.0);
    log_sum += std::log(p);
  }
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

double sentence_bleu(const TokenList& candidate, const TokenList& reference,
                     std::size_t max_n) {
  return bleu({candidate}, {reference}, max_n);
}

// ---------------------------------------------------------------------------
// Numeric answers

NumericAnswer parse_numeric_answer(std::string_view text) {
  static const std::regex number(R"([+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, number)) return {};
  const std::string token = m.str(0);
  return {true, std::strtod(token.c_str(), nullptr)};
}

// ---------------------------------------------------------------------------
// Records

std::vector<TextRecord> read_text_records(std::istream& in) {
  std::vector<TextRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      TextRecord r;
      r.id = rec.at("id").get<std::string>();
      r.text = rec.at("text").get<std::string>();
      if (auto it = rec.find("value"); it != rec.end() && !it->is_null()) {
        r.value = it->get<double>();
      }
      if (auto it = rec.find("selfies"); it != rec.end() && !it->is_null()) {
        r.selfies = it->get<std::string>();
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TextRecord> load_text_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_text_records(in);
}

void write_text_records(std::ostream& out, const std::vector<TextRecord>& records) {
  for (const auto& r : records) {
    ordered_json rec;
    rec["id"] = r.id;
    rec["text"] = r.text;
    if (r.value) rec["value"] = *r.value;
    if (r.selfies) rec["selfies"] = *r.selfies;
    out << rec.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Corpus evaluation

EvalReport evaluate_corpus(const std::vector<TextRecord>& predictions,
                           const std::vector<TextRecord>& references,
                           const EntityGazetteer& gazetteer, const EvalOptions& options,
                           JudgeTransport* transport) {
  std::unordered_map<std::string, const TextRecord*> pred_by_id;
  for (const auto& p : predictions) {
    if (!pred_by_id.emplace(p.id, &p).second) {
      throw ValidationError("duplicate prediction id '" + p.id + "'");
    }
  }
  std::unordered_set<std::string> ref_ids;
  std::vector<std::string> missing_pred;
  for (const auto& r : references) {
    if (!ref_ids.insert(r.id).second) throw ValidationError("duplicate reference id '" + r.id + "'");
    if (!pred_by_id.count(r.id)) missing_pred.push_back(r.id);
  }
  std::vector<std::string> missing_ref;
  for (const auto& p : predictions)
    if (!ref_ids.count(p.id)) missing_ref.push_back(p.id);
  if (!missing_pred.empty() || !missing_ref.empty()) {
    std::string msg = "prediction/reference ids do not align";
    if (!missing_pred.empty()) {
      msg += "; references without prediction:";
      for (const auto& id : missing_pred) msg += " " + id;
    }
    if (!missing_ref.empty()) {
      msg += "; predictions without reference:";
      for (const auto& id : missing_ref) msg += " " + id;
    }
    throw ValidationError(msg);
  }
  if (references.empty()) throw ValidationError("evaluation corpus is empty");

  EvalReport report;
  report.config = options.metadata;
  report.numeric = options.numeric;
  report.samples.resize(references.size());
  for (std::size_t i = 0; i < references.size(); ++i) {
    const TextRecord& ref = references[i];
    const TextRecord& pred = *pred_by_id.at(ref.id);
    SampleMetrics& s = report.samples[i];
    s.id = ref.id;
    const EntitySet p = extract_entities(pred.text, gazetteer, options.entity_threshold);
    const EntitySet g = extract_entities(ref.text, gazetteer, options.entity_threshold);
    s.charm = charm(p, g);
    s.rcharm = rcharm(p, g);
    s.charm_empty = p.empty();
    s.rcharm_empty = g.empty();
    s.bleu = sentence_bleu(bleu_tokens(pred.text), bleu_tokens(ref.text));
    if (options.numeric) {
      const NumericAnswer a = parse_numeric_answer(pred.text);
      s.valid = a.valid;
      const double truth = ref.value ? *ref.value : parse_numeric_answer(ref.text).value;
      if (a.valid) s.abs_error = std::abs(a.value - truth);
    }
  }

  if (options.judge) {
    std::unique_ptr<JudgeTransport> owned;
    if (!options.judge_config.stub && !transport) {
      owned = std::make_unique<HttpJudgeTransport>(options.judge_config);
      transport = owned.get();
    }
    // A fixed pool of workers bounds the number of requests in flight.
    const std::size_t workers =
        std::min(references.size(), std::max<std::size_t>(1, options.judge_config.max_concurrency));
    std::atomic<std::size_t> next{0};
    std::vector<JudgeResult> results(references.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < references.size(); i = next++) {
          const TextRecord& ref = references[i];
          results[i] = judge_score(ref.selfies.value_or(""), ref.text,
                                   pred_by_id.at(ref.id)->text, options.judge_config, transport);
        }
      });
    }
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < results.size(); ++i) {
      report.samples[i].judge = results[i].score;
      report.samples[i].judge_error = results[i].error;
    }
  }
  // Corpus BLEU needs the token lists, not the per-sample rows.
  std::vector<TokenList> cands, refs;
  for (const auto& ref : references) {
    cands.push_back(bleu_tokens(pred_by_id.at(ref.id)->text));
    refs.push_back(bleu_tokens(ref.text));
  }
  report.corpus_bleu = bleu(cands, refs);
  recompute_aggregates(report);
  return report;
}

void recompute_aggregates(EvalReport& report) {
  const auto n = static_cast<double>(report.samples.size());
  double charm_sum = 0.0, rcharm_sum = 0.0, bleu_sum = 0.0, err_sum = 0.0, judge_sum = 0.0;
  std::size_t valid = 0;
  report.judged = 0;
  for (const auto& s : report.samples) {
    charm_sum += s.charm;
    rcharm_sum += s.rcharm;
    bleu_sum += s.bleu;
    if (s.valid) {
      ++valid;
      err_sum += s.abs_error.value_or(0.0);
    }
    if (s.judge) {
      ++report.judged;
      judge_sum += *s.judge;
    }
  }
  report.mean_charm = n > 0 ? charm_sum / n : 0.0;
  report.mean_rcharm = n > 0 ? rcharm_sum / n : 0.0;
  report.mean_bleu = n > 0 ? bleu_sum / n : 0.0;
  report.validity_pct = n > 0 ? 100.0 * static_cast<double>(valid) / n : 0.0;
  report.mae = valid > 0 ? std::optional<double>(err_sum / static_cast<double>(valid))
                         : std::nullopt;
  report.mean_judge = report.judged > 0
                          ? std::optional<double>(judge_sum / static_cast<double>(report.judged))
                          : std::nullopt;
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  ordered_json j;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : report.config) cfg[k] = v;
  j["config"] = std::move(cfg);
  ordered_json agg;
  agg["samples"] = report.samples.size();
  agg["charm"] = report.mean_charm;
  agg["rcharm"] = report.mean_rcharm;
  agg["bleu"] = report.mean_bleu;
  agg["corpus_bleu"] = report.corpus_bleu;
  if (report.numeric) {
    agg["validity_pct"] = report.validity_pct;
    agg["mae"] = report.mae ? ordered_json(*report.mae) : ordered_json(nullptr);
  }
  if (report.judged > 0 || std::any_of(report.samples.begin(), report.samples.end(),
                                       [](const SampleMetrics& s) { return !s.judge_error.empty(); })) {
    agg["judge"] = report.mean_judge ? ordered_json(*report.mean_judge) : ordered_json(nullptr);
    agg["judged"] = report.judged;
  }
  j["aggregate"] = std::move(agg);
  ordered_json rows = ordered_json::array();
  for (const auto& s : report.samples) {
    ordered_json r;
    r["id"] = s.id;
    r["charm"] = s.charm;
    r["rcharm"] = s.rcharm;
    r["charm_empty"] = s.charm_empty;
    r["rcharm_empty"] = s.rcharm_empty;
    r["bleu"] = s.bleu;
    if (report.numeric) {
      r["valid"] = s.valid;
      r["abs_error"] = s.abs_error ? ordered_json(*s.abs_error) : ordered_json(nullptr);
    }
    if (s.judge) r["judge"] = *s.judge;
    if (!s.judge_error.empty()) r["judge_error"] = s.judge_error;
    rows.push_back(std::move(r));
  }
  j["samples"] = std::move(rows);
  out << j.dump(2) << '\n';
}

void write_report_text(std::ostream& out, const EvalReport& report) {
  char buf[256];
  for (const auto& [k, v] : report.config) out << k << ": " << v << '\n';
  std::snprintf(buf, sizeof buf, "%-14s %8s %8s %8s", "id", "charm", "rcharm", "bleu");
  out << buf;
  if (report.numeric) {
    std::snprintf(buf, sizeof buf, " %6s %10s", "valid", "abs_err");
    out << buf;
  }
  out << " judge\n";
  for (const auto& s : report.samples) {
    std::snprintf(buf, sizeof buf, "%-14s %8.4f %8.4f %8.2f", s.id.c_str(), s.charm, s.rcharm,
                  s.bleu);
    out << buf;
    if (report.numeric) {
      if (s.abs_error) {
        std::snprintf(buf, sizeof buf, " %6s %10.4f", s.valid ? "yes" : "no", *s.abs_error);
      } else {
        std::snprintf(buf, sizeof buf, " %6s %10s", s.valid ? "yes" : "no", "-");
      }
      out << buf;
    }
    out << ' ' << (s.judge ? std::to_string(*s.judge) : std::string("-")) << '\n';
  }
  std::snprintf(buf, sizeof buf, "mean charm %.4f  rcharm %.4f  bleu %.2f  corpus bleu %.2f\n",
                report.mean_charm, report.mean_rcharm, report.mean_bleu, report.corpus_bleu);
  out << buf;
  if (report.numeric) {
    if (report.mae) {
      std::snprintf(buf, sizeof buf, "validity %.1f%%  mae %.4f\n", report.validity_pct, *report.mae);
    } else {
      std::snprintf(buf, sizeof buf, "validity %.1f%%  mae -\n", report.validity_pct);
    }
    out << buf;
  }
  if (report.mean_judge) {
    std::snprintf(buf, sizeof buf, "judge %.3f over %zu samples\n", *report.mean_judge,
                  report.judged);
    out << buf;
  }
}

}  // namespace molproj
