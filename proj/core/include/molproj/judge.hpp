// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

// LLM-as-judge scoring of generated molecule descriptions on a 0-5 scale.
// The wire protocol is documented in docs/judge.md.

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace molproj {

struct JudgeConfig {
  /// e.g. "https://judge.example.org/v1/score"; unused in stub mode.
  std::string endpoint;
  /// Environment variable holding the bearer token.
  std::string api_key_env = "MOLPROJ_JUDGE_API_KEY";
  bool stub = false;
  std::size_t max_retries = 3;
  std::size_t max_concurrency = 4;
  int timeout_seconds = 30;
};

/// Raised by transports for failures worth retrying (connection errors,
/// timeouts, HTTP 429 and 5xx).
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JudgeTransport {
 public:
  virtual ~JudgeTransport() = default;
  /// Sends the prompt and returns the judge's reply text.
  virtual std::string send(const std::string& prompt) = 0;
};

/// POSTs {"prompt": ...} as JSON with "Authorization: Bearer <key>". A JSON
/// object reply is read from its "text" field; any other body is the reply.
class HttpJudgeTransport : public JudgeTransport {
 public:
  explicit HttpJudgeTransport(const JudgeConfig& config);
  std::string send(const std::string& prompt) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
  int timeout_seconds_;
};

/// Prompt with, in order, the SELFIES string, the ground-truth description
/// and the model output, asking for a 0-5 score on factual informativeness
/// and alignment with the ground truth.
std::string judge_prompt(std::string_view selfies, std::string_view groundtruth,
                         std::string_view generated);

/// First integer in the reply if it lies in 0..5.
std::optional<int> parse_judge_score(std::string_view reply);

/// Offline stand-in: round(5 * F1) of the lowercased unigram sets.
int stub_judge_score(std::string_view groundtruth, std::string_view generated);

struct JudgeResult {
  std::optional<int> score;
  std::string error;
  std::size_t attempts = 0;
};

/// Scores one sample. Transport failures and unparseable replies are retried
/// up to config.max_retries times; after that the error is returned.
JudgeResult judge_score(std::string_view selfies, std::string_view groundtruth,
                        std::string_view generated, const JudgeConfig& config,
                        JudgeTransport* transport);

}  // namespace molproj
