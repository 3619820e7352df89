// SPDX-License-Identifier: Apache-2.0
#include "augloop/gateway.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace augloop {

namespace {

constexpr const char* kSystemText =
    "You design data augmentation policies for image classification experiments. "
    "Reply with a short rationale and one policy as JSON.";
constexpr const char* kGlobalClause =
    "Your objective is to find the best augmentation policy overall, not just to improve the last one.";
constexpr const char* kFreedomClause =
    "You are free to remove or add new augmentation techniques, as long as the total number remains the same.";
constexpr const char* kTailorClause =
    "Always tailor your augmentation suggestions to the specific properties of the dataset and model described "
    "earlier.";
constexpr std::size_t kHistoryWindow = 10;

std::string context_block(const ExperimentContext& ctx) {
  std::string out = fmt::format("Dataset: {}\nModel: {}\nPerformance goal: {}\n", ctx.dataset_description,
                                ctx.model_description, ctx.performance_goal);
  if (ctx.constraints.empty()) {
    out += "Constraints: none\n";
  } else {
    out += "Constraints:\n";
    for (const auto& c : ctx.constraints) out += fmt::format("- {}\n", c);
  }
  return out;
}

std::string catalog_block(const Catalog& catalog) {
  return "Available operations and parameter ranges:\n" + catalog.describe() +
         "Every operation also takes \"p\", the probability in [0, 1] that it is applied to a sample.\n";
}

std::string answer_block() {
  return "Answer with a brief rationale, then the policy as one JSON object inside a ```json fenced block, "
         "following this schema:\n" +
         policy_schema_text() + "\n";
}

}  // namespace

void ExperimentContext::validate() const {
  if (n_augmentations < 1) throw ValidationError("BAD_CONFIG", "n_augmentations must be >= 1");
  if (dataset_description.empty()) throw ValidationError("BAD_CONFIG", "dataset_description must not be empty");
}

const std::string& policy_schema_text() {
  static const std::string schema =
      R"({"n": int, "ops": [{"kind": str, "params": {str: number}, "p": number}]})";
  return schema;
}

PromptBundle build_initial_prompt(const ExperimentContext& ctx, const Catalog& catalog) {
  ctx.validate();
  PromptBundle b;
  b.system_text = kSystemText;
  b.schema_text = policy_schema_text();
  b.user_text = context_block(ctx);
  b.user_text += fmt::format("Propose an augmentation policy with exactly {} augmentation operations.\n",
                             ctx.n_augmentations);
  b.user_text += catalog_block(catalog);
  b.user_text += answer_block();
  b.user_text += kGlobalClause;
  b.user_text += "\n";
  return b;
}

PromptBundle build_feedback_prompt(const std::vector<HistoryEntry>& history, const ExperimentContext& ctx,
                                   const Catalog& catalog) {
  if (history.empty()) throw ValidationError("EMPTY_HISTORY", "feedback prompt needs at least one result");
  ctx.validate();
  PromptBundle b;
  b.system_text = kSystemText;
  b.schema_text = policy_schema_text();
  b.user_text = context_block(ctx);
  b.user_text += "Results so far (oldest first):\n";
  const auto start = history.size() > kHistoryWindow ? history.size() - kHistoryWindow : 0;
  for (auto i = start; i < history.size(); ++i) {
    const auto& h = history[i];
    b.user_text += fmt::format("- iteration {} | validation accuracy {:.4f} | policy {}\n", h.iteration,
                               h.val_accuracy, canonical_serialize(h.policy, catalog));
  }
  b.user_text += fmt::format("Propose the next augmentation policy with exactly {} augmentation operations.\n",
                             ctx.n_augmentations);
  b.user_text += catalog_block(catalog);
  b.user_text += fmt::format("{}\n{}\n", kFreedomClause, kTailorClause);
  b.user_text += answer_block();
  b.user_text += kGlobalClause;
  b.user_text += "\n";
  return b;
}

std::string build_repair_prompt(const ParseErrorList& errors, int n_required) {
  return fmt::format(
      "Your previous reply could not be used as a policy. Problems found:\n{}"
      "Reply again with exactly {} augmentation operations as one JSON object inside a ```json fenced block, "
      "following this schema:\n{}\n",
      render_errors(errors), n_required, policy_schema_text());
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ExtractedReply extract_policy_text(const std::string& reply) {
  const auto open = reply.find("```");
  if (open == std::string::npos) return {reply, ""};
  auto body = reply.find('\n', open);
  body = body == std::string::npos ? reply.size() : body + 1;
  const auto close = reply.find("```", body);
  ExtractedReply out;
  out.candidate = reply.substr(body, close == std::string::npos ? std::string::npos : close - body);
  const auto after = close == std::string::npos ? reply.size() : close + 3;
  const auto before = trim(std::string_view(reply).substr(0, open));
  const auto rest = trim(std::string_view(reply).substr(after));
  out.rationale = before.empty() || rest.empty() ? before + rest : before + "\n" + rest;
  return out;
}

//------------------------------------------------------------------------------

void ProviderConfig::validate() const {
  if (temperature != 0.0) throw ValidationError("BAD_CONFIG", "provider temperature must be 0");
  if (max_repairs < 0) throw ValidationError("BAD_CONFIG", "max_repairs must be >= 0");
  if (!(timeout_s > 0.0)) throw ValidationError("BAD_CONFIG", "provider timeout must be > 0");
}

double estimate_cost(const std::vector<ChatMessage>& request, const std::string& reply, const ProviderConfig& cfg) {
  std::size_t in_chars = 0;
  for (const auto& m : request) in_chars += m.content.size();
  const auto tokens = [](std::size_t chars) { return static_cast<double>((chars + 3) / 4); };
  return (tokens(in_chars) * cfg.price_input_per_mtok + tokens(reply.size()) * cfg.price_output_per_mtok) / 1e6;
}

ScriptedProvider::ScriptedProvider(std::vector<std::string> replies) : replies_(std::move(replies)) {}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("BAD_CONFIG", "cannot open scripted replies " + path);
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (!doc.is_array()) throw ValidationError("BAD_CONFIG", path + ": scripted replies must be a JSON array");
  std::vector<std::string> replies;
  for (const auto& r : doc) {
    if (!r.is_string()) throw ValidationError("BAD_CONFIG", path + ": scripted replies must be strings");
    replies.push_back(r.get<std::string>());
  }
  return std::make_unique<ScriptedProvider>(std::move(replies));
}

ProviderReply ScriptedProvider::complete(const std::vector<ChatMessage>& messages) {
  if (calls_++ >= replies_.size()) {
    throw ProviderError("PROVIDER_HTTP", fmt::format("scripted provider has no reply #{}", calls_), 503);
  }
  const auto& r = replies_[calls_ - 1];
  if (r == "!timeout") throw ProviderError("PROVIDER_TIMEOUT", "scripted timeout");
  if (r.rfind("!http:", 0) == 0) {
    const int status = std::stoi(r.substr(6));
    throw ProviderError("PROVIDER_HTTP", fmt::format("scripted HTTP status {}", status), status);
  }
  return {r, estimate_cost(messages, r, ProviderConfig{})};
}

ProviderReply ReplayProvider::complete(const std::vector<ChatMessage>& messages) {
  ++served_;
  if (recorded_.empty()) {
    mismatches_.push_back(fmt::format("request #{} has no recorded reply", served_));
    throw ProviderError("PROVIDER_HTTP", "replay ran out of recorded replies", 410);
  }
  auto rec = std::move(recorded_.front());
  recorded_.pop_front();
  if (rec.request != messages) mismatches_.push_back(fmt::format("request #{} differs from the recording", served_));
  if (!rec.error.empty()) throw ProviderError(rec.error, "recorded provider failure", rec.status);
  return {rec.reply, rec.cost};
}

//------------------------------------------------------------------------------

namespace {

nlohmann::json errors_json(const ParseErrorList& errors) {
  auto out = nlohmann::json::array();
  for (const auto& e : errors) {
    nlohmann::json j{{"code", std::string(to_string(e.code))}, {"field", e.field}, {"message", e.message},
                     {"op_index", e.op_index}};
    if (e.position != std::string::npos) j["position"] = e.position;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

nlohmann::json LLMTranscript::to_json() const {
  nlohmann::json j;
  j["prompt"] = {{"system_text", prompt.system_text}, {"user_text", prompt.user_text},
                 {"schema_text", prompt.schema_text}};
  auto ex = nlohmann::json::array();
  for (const auto& e : exchanges) {
    auto req = nlohmann::json::array();
    for (const auto& m : e.request) req.push_back({{"role", m.role}, {"content", m.content}});
    ex.push_back({{"request", req}, {"raw_response", e.raw_response}, {"errors", errors_json(e.errors)},
                  {"provider_error", e.provider_error}, {"provider_status", e.provider_status}, {"cost", e.cost}, {"wall_latency_s", e.wall_latency_s}});
  }
  j["exchanges"] = ex;
  j["raw_response"] = raw_response;
  j["policy"] = policy ? nlohmann::json(canonical_serialize(*policy)) : nlohmann::json(nullptr);
  j["final_errors"] = errors_json(final_errors);
  j["rationale_text"] = rationale_text;
  j["repair_count"] = repair_count;
  j["cost_estimate"] = cost_estimate;
  j["wall_latency_s"] = wall_latency_s;
  j["error_code"] = error_code;
  return j;
}

QueryOutcome query_policy(Provider& provider, const PromptBundle& prompt, const Catalog& catalog, int n_required,
                          int max_repairs) {
  QueryOutcome out;
  auto& t = out.transcript;
  t.prompt = prompt;
  std::vector<ChatMessage> messages = {{"system", prompt.system_text}, {"user", prompt.user_text}};
  for (int attempt = 0;; ++attempt) {
    Exchange ex;
    ex.request = messages;
    const auto t0 = std::chrono::steady_clock::now();
    ProviderReply reply;
    try {
      reply = provider.complete(messages);
    } catch (const ProviderError& e) {
      ex.provider_error = e.code();
      ex.provider_status = e.status();
      t.exchanges.push_back(ex);
      out.error_code = e.code() == "PROVIDER_HTTP" ? fmt::format("PROVIDER_HTTP({})", e.status()) : e.code();
      out.error_message = e.what();
      t.error_code = out.error_code;
      return out;
    }
    ex.wall_latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ex.raw_response = reply.content;
    ex.cost = reply.cost;
    t.wall_latency_s += ex.wall_latency_s;
    t.cost_estimate += reply.cost;
    t.raw_response = reply.content;

    const auto extracted = extract_policy_text(reply.content);
    auto parsed = parse_policy(extracted.candidate, catalog, n_required);
    ex.errors = parsed.errors;
    t.exchanges.push_back(ex);
    if (parsed.ok()) {
      t.policy = parsed.policy;
      t.rationale_text = extracted.rationale;
      t.final_errors.clear();
      out.policy = std::move(parsed.policy);
      return out;
    }
    t.final_errors = parsed.errors;
    if (attempt >= max_repairs) {
      out.error_code = "REPAIRS_EXHAUSTED";
      out.error_message = render_errors(parsed.errors);
      t.error_code = out.error_code;
      return out;
    }
    messages.push_back({"assistant", reply.content});
    messages.push_back({"user", build_repair_prompt(parsed.errors, n_required)});
    ++t.repair_count;
  }
}

}  // namespace augloop
