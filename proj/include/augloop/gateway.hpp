// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "augloop/error.hpp"
#include "augloop/policy.hpp"

namespace augloop {

struct ExperimentContext {
  std::string dataset_description;
  std::string model_description;
  std::string performance_goal;
  int n_augmentations = 3;
  std::vector<std::string> constraints;

  void validate() const;
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::string schema_text;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

/// The policy schema embedded in every prompt.
const std::string& policy_schema_text();

PromptBundle build_initial_prompt(const ExperimentContext& ctx, const Catalog& catalog = Catalog::standard());

struct HistoryEntry {
  int iteration = 0;
  Policy policy;
  double val_accuracy = 0.0;
};

/// Uses the last 10 entries, oldest first. Throws ValidationError
/// EMPTY_HISTORY when `history` is empty.
PromptBundle build_feedback_prompt(const std::vector<HistoryEntry>& history, const ExperimentContext& ctx,
                                   const Catalog& catalog = Catalog::standard());

std::string build_repair_prompt(const ParseErrorList& errors, int n_required);

/// Splits a reply into the first fenced block (or the whole body when there
/// is none) and the remaining prose.
struct ExtractedReply {
  std::string candidate;
  std::string rationale;
};
ExtractedReply extract_policy_text(const std::string& reply);

//------------------------------------------------------------------------------
// Providers

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ProviderReply {
  std::string content;
  double cost = 0.0;  // estimated currency units
};

struct ProviderConfig {
  std::string endpoint_url;
  std::string model_identifier;
  double temperature = 0.0;
  double timeout_s = 60.0;
  int max_repairs = 3;
  std::string api_key_env = "OPENAI_API_KEY";
  double price_input_per_mtok = 0.15;
  double price_output_per_mtok = 0.60;

  void validate() const;
};

/// Token estimate used when a provider reports no usage: ceil(chars / 4).
double estimate_cost(const std::vector<ChatMessage>& request, const std::string& reply, const ProviderConfig& cfg);

/// Throws RuntimeError with code PROVIDER_TIMEOUT or PROVIDER_HTTP.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ProviderReply complete(const std::vector<ChatMessage>& messages) = 0;
  virtual std::string name() const = 0;
};

class ProviderError : public RuntimeError {
 public:
  ProviderError(std::string code, const std::string& message, int status = 0)
      : RuntimeError(std::move(code), message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Returns canned replies in order; a reply of the form "!timeout" or
/// "!http:<status>" raises the matching provider error instead.
class ScriptedProvider final : public Provider {
 public:
  explicit ScriptedProvider(std::vector<std::string> replies);
  /// Reads a JSON array of strings.
  static std::unique_ptr<ScriptedProvider> from_file(const std::string& path);
  ProviderReply complete(const std::vector<ChatMessage>& messages) override;
  std::string name() const override { return "mock-scripted"; }
  std::size_t calls() const { return calls_; }

 private:
  std::vector<std::string> replies_;
  std::size_t calls_ = 0;
};

struct OracleRules {
  double harden_factor = 1.10;
  double soften_factor = 0.80;
  bool swap_on_decline = true;
};

/// Rule-based stand-in for an LLM: reads the history embedded in a feedback
/// prompt, hardens the last policy after an improvement and softens it (and
/// swaps op 0) after a decline.
class MockOracleProvider final : public Provider {
 public:
  explicit MockOracleProvider(OracleRules rules = {}, const Catalog& catalog = Catalog::standard());
  ProviderReply complete(const std::vector<ChatMessage>& messages) override;
  std::string name() const override { return "mock-oracle"; }

  Policy seed_policy(int n) const;
  Policy harden(const Policy& p) const;
  Policy soften(const Policy& p) const;

 private:
  OracleRules rules_;
  const Catalog& catalog_;
};

/// Chat-completions client over libcurl. The API key is read from the
/// environment on every call and never logged.
class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(ProviderConfig cfg);
  ProviderReply complete(const std::vector<ChatMessage>& messages) override;
  std::string name() const override { return "http"; }

 private:
  ProviderConfig cfg_;
};

/// Serves recorded replies and remembers requests that differ from the
/// recorded ones.
class ReplayProvider final : public Provider {
 public:
  struct Recorded {
    std::vector<ChatMessage> request;
    std::string reply;
    double cost = 0.0;
    std::string error;  // PROVIDER_TIMEOUT or PROVIDER_HTTP to re-raise
    int status = 0;
  };
  explicit ReplayProvider(std::deque<Recorded> recorded) : recorded_(std::move(recorded)) {}
  ProviderReply complete(const std::vector<ChatMessage>& messages) override;
  std::string name() const override { return "replay"; }
  const std::vector<std::string>& mismatches() const { return mismatches_; }
  std::size_t remaining() const { return recorded_.size(); }

 private:
  std::deque<Recorded> recorded_;
  std::vector<std::string> mismatches_;
  std::size_t served_ = 0;
};

//------------------------------------------------------------------------------
// Query with repair loop

struct Exchange {
  std::vector<ChatMessage> request;
  std::string raw_response;
  ParseErrorList errors;
  std::string provider_error;  // set when the call failed; raw_response is then empty
  int provider_status = 0;
  double cost = 0.0;
  double wall_latency_s = 0.0;
};

struct LLMTranscript {
  PromptBundle prompt;
  std::vector<Exchange> exchanges;
  std::string raw_response;  // last reply received
  std::optional<Policy> policy;
  ParseErrorList final_errors;
  std::string rationale_text;
  int repair_count = 0;
  double wall_latency_s = 0.0;
  double cost_estimate = 0.0;
  std::string error_code;  // empty on success

  nlohmann::json to_json() const;
};

struct QueryOutcome {
  std::optional<Policy> policy;
  std::string error_code;  // PROVIDER_TIMEOUT, PROVIDER_HTTP(<status>), REPAIRS_EXHAUSTED
  std::string error_message;
  LLMTranscript transcript;

  bool ok() const { return policy.has_value(); }
};

/// Never throws for provider failures; they come back in QueryOutcome.
QueryOutcome query_policy(Provider& provider, const PromptBundle& prompt, const Catalog& catalog, int n_required,
                          int max_repairs);

}  // namespace augloop
