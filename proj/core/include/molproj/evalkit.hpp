// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// Text evaluation: gazetteer entity extraction, hallucination ratios over
// entity sets, corpus BLEU, numeric answer parsing and corpus reports.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "molproj/judge.hpp"

namespace molproj {

/// Lowercase, trim, collapse internal whitespace runs to one space.
std::string normalize_text(std::string_view text);

/// Chemical entity terms. Terms are stored normalized; each maps to a
/// canonical id (the normalized term unless given) and a confidence.
class EntityGazetteer {
 public:
  struct Entry {
    std::string canonical;
    double confidence = 1.0;
  };

  /// Later additions of the same normalized term replace earlier ones.
  void add(std::string_view term, double confidence = 1.0,
           std::string_view canonical = {});

  /// Lines "term[<TAB>confidence[<TAB>canonical]]"; blank lines and lines
  /// starting with '#' are skipped. Bad confidence -> ParseError.
  static EntityGazetteer parse(std::istream& in);
  static EntityGazetteer load(const std::filesystem::path& path);

  const Entry* find(std::string_view normalized_term) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t longest_term() const { return longest_; }

 private:
  std::unordered_map<std::string, Entry> entries_;
  std::size_t longest_ = 0;
};

using EntitySet = std::set<std::string>;

/// Greedy left-to-right longest match over the normalized text. Matches
/// start and end at word boundaries (non-alphanumeric neighbors). A matched
/// span is consumed even when its confidence is below `threshold`; only
/// entries at or above the threshold are emitted.
EntitySet extract_entities(std::string_view text, const EntityGazetteer& gazetteer,
                           double threshold = 0.9);

/// |predicted \ groundtruth| / |predicted|; 0 when predicted is empty.
double charm(const EntitySet& predicted, const EntitySet& groundtruth);
/// |groundtruth \ predicted| / |groundtruth|; 0 when groundtruth is empty.
double rcharm(const EntitySet& predicted, const EntitySet& groundtruth);

using TokenList = std::vector<std::string>;

/// Lowercased whitespace tokens.
TokenList bleu_tokens(std::string_view text);

/// Corpus BLEU in [0, 100]: clipped n-gram precisions up to max_n pooled
/// over the corpus, geometric mean, brevity penalty exp(1 - r/c) when
/// c <= r. A higher-order precision with zero matches is smoothed to
/// 1 / (total + 1); zero unigram matches give 0. Throws ValidationError on
/// an empty corpus or mismatched list sizes.
double bleu(const std::vector<TokenList>& candidates,
            const std::vector<TokenList>& references, std::size_t max_n = 4);
double sentence_bleu(const TokenList& candidate, const TokenList& reference,
                     std::size_t max_n = 4);

struct NumericAnswer {
  bool valid = false;
  double value = 0.0;
};

/// First match of [+-]?(digits[.digits] | .digits)([eE][+-]?digits)?.
NumericAnswer parse_numeric_answer(std::string_view text);

/// One line of a predictions or references file.
struct TextRecord {
  std::string id;
  std::string text;
  std::optional<double> value;
  std::optional<std::string> selfies;  // references only, used by the judge
};

/// JSONL with fields "id", "text" and optional "value" / "selfies".
std::vector<TextRecord> read_text_records(std::istream& in);
std::vector<TextRecord> load_text_records(const std::filesystem::path& path);
void write_text_records(std::ostream& out, const std::vector<TextRecord>& records);

struct EvalOptions {
  double entity_threshold = 0.9;
  bool numeric = false;  // parse numbers and report validity / MAE
  bool judge = false;
  JudgeConfig judge_config;
  /// Copied verbatim into the report's config block.
  std::map<std::string, std::string> metadata;
};

struct SampleMetrics {
  std::string id;
  double charm = 0.0;
  double rcharm = 0.0;
  bool charm_empty = false;   // no predicted entities
  bool rcharm_empty = false;  // no ground-truth entities
  double bleu = 0.0;          // sentence BLEU
  bool valid = false;
  std::optional<double> abs_error;
  std::optional<int> judge;
  std::string judge_error;
};

struct EvalReport {
  std::map<std::string, std::string> config;
  std::vector<SampleMetrics> samples;
  double mean_charm = 0.0;
  double mean_rcharm = 0.0;
  double mean_bleu = 0.0;
  double corpus_bleu = 0.0;
  bool numeric = false;
  double validity_pct = 0.0;
  std::optional<double> mae;  // over valid samples
  std::optional<double> mean_judge;
  std::size_t judged = 0;
};

/// Pairs predictions with references by id (reference order). Throws
/// ValidationError listing orphan ids on either side.
EvalReport evaluate_corpus(const std::vector<TextRecord>& predictions,
                           const std::vector<TextRecord>& references,
                           const EntityGazetteer& gazetteer, const EvalOptions& options,
                           JudgeTransport* transport = nullptr);

/// Recomputes the aggregate fields from the per-sample rows.
void recompute_aggregates(EvalReport& report);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_report_text(std::ostream& out, const EvalReport& report);

}  // namespace molproj
