// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/judge.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>
#include <set>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "molproj/errors.hpp"
#include "molproj/evalkit.hpp"

namespace molproj {

HttpJudgeTransport::HttpJudgeTransport(const JudgeConfig& config)
    : timeout_seconds_(config.timeout_seconds) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config.endpoint, m, url)) {
    throw ConfigError("judge endpoint '" + config.endpoint +
                      "' is not an http(s) URL; use --stub-judge for offline runs");
  }
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
  if (const char* key = std::getenv(config.api_key_env.c_str())) api_key_ = key;
}

std::string HttpJudgeTransport::send(const std::string& prompt) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const std::string body = nlohmann::json{{"prompt", prompt}}.dump();
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) {
    throw TransportError("judge request failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("judge returned HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ValidationError("judge returned HTTP " + std::to_string(res->status) + ": " +
                          res->body.substr(0, 200));
  }
  const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_object() && parsed.contains("text") && parsed["text"].is_string()) {
    return parsed["text"].get<std::string>();
  }
  return res->body;
}

std::string judge_prompt(std::string_view selfies, std::string_view groundtruth,
                         std::string_view generated) {
  std::ostringstream p;
  p << "You are grading a description of a molecule.\n\n"
    << "Molecule (SELFIES): " << selfies << "\n\n"
    << "Ground-truth description: " << groundtruth << "\n\n"
    << "Model output: " << generated << "\n\n"
    << "Score the model output from 0 to 5 using two criteria: factual informativeness "
       "(does it state correct, specific facts about this molecule) and alignment with the "
       "ground truth (does it agree with the ground-truth description). 0 means wrong or "
       "uninformative, 5 means fully informative and aligned. Reply with the integer score "
       "first.";
  return p.str();
}

std::optional<int> parse_judge_score(std::string_view reply) {
  static const std::regex integer(R"(\d+)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(reply.begin(), reply.end(), m, integer)) return std::nullopt;
  const std::string digits = m.str(0);
  if (digits.size() > 1) return std::nullopt;
  const int v = digits[0] - '0';
  if (v > 5) return std::nullopt;
  return v;
}

int stub_judge_score(std::string_view groundtruth, std::string_view generated) {
  const auto g_tokens = bleu_tokens(groundtruth);
  const auto o_tokens = bleu_tokens(generated);
  const std::set<std::string> g(g_tokens.begin(), g_tokens.end());
  const std::set<std::string> o(o_tokens.begin(), o_tokens.end());
  if (g.empty() || o.empty()) return 0;
  std::size_t common = 0;
  for (const auto& t : o) common += g.count(t);
  if (common == 0) return 0;
  const double precision = static_cast<double>(common) / static_cast<double>(o.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  const double f1 = 2.0 * precision * recall / (precision + recall);
  return static_cast<int>(std::lround(5.0 * f1));
}

JudgeResult judge_score(std::string_view selfies, std::string_view groundtruth,
                        std::string_view generated, const JudgeConfig& config,
                        JudgeTransport* transport) {
  JudgeResult result;
  if (config.stub) {
    result.score = stub_judge_score(groundtruth, generated);
    result.attempts = 1;
    return result;
  }
  if (!transport) {
    result.error = "no judge transport configured";
    return result;
  }
  const std::string prompt = judge_prompt(selfies, groundtruth, generated);
  for (std::size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
    ++result.attempts;
    try {
      const std::string reply = transport->send(prompt);
      if (auto score = parse_judge_score(reply)) {
        result.score = score;
        result.error.clear();
        return result;
      }
      result.error = "unparseable judge reply: " + reply.substr(0, 120);
    } catch (const TransportError& e) {
      result.error = e.what();
    } catch (const std::exception& e) {
      result.error = e.what();
      return result;
    }
    spdlog::warn("judge attempt {} failed: {}", result.attempts, result.error);
  }
  return result;
}

}  // namespace molproj
