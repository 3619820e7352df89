// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "augloop/gateway.hpp"

namespace augloop {

namespace {

struct Observed {
  double accuracy = 0.0;
  Policy policy;
};

AugOpInstance seed_op(AugKind kind, const std::string& param, double value) {
  AugOpInstance op;
  op.kind = kind;
  op.params[param] = value;
  return op;
}

// Alphabetically next kind after `after` (wrapping) that is not in `used`.
std::optional<AugKind> next_unused(AugKind after, const std::set<AugKind>& used) {
  const auto& kinds = all_aug_kinds();
  for (std::size_t step = 1; step <= kinds.size(); ++step) {
    const auto k = kinds[(static_cast<std::size_t>(after) + step) % kinds.size()];
    if (!used.count(k)) return k;
  }
  return std::nullopt;
}

std::set<AugKind> kinds_of(const Policy& p) {
  std::set<AugKind> used;
  for (const auto& op : p.ops) used.insert(op.kind);
  return used;
}

std::string reply_text(const std::string& rationale, const Policy& policy, const Catalog& catalog) {
  return fmt::format("{}\n\n```json\n{}\n```\n", rationale, canonical_serialize(policy, catalog));
}

}  // namespace

MockOracleProvider::MockOracleProvider(OracleRules rules, const Catalog& catalog)
    : rules_(rules), catalog_(catalog) {}

Policy MockOracleProvider::seed_policy(int n) const {
  std::vector<AugOpInstance> ops = {seed_op(AugKind::rotate, "degrees", 15.0),
                                    seed_op(AugKind::gaussian_blur, "sigma", 1.0),
                                    seed_op(AugKind::brightness, "strength", 0.2)};
  if (static_cast<int>(ops.size()) > n) ops.resize(static_cast<std::size_t>(n));
  while (static_cast<int>(ops.size()) < n) {
    std::set<AugKind> used;
    for (const auto& op : ops) used.insert(op.kind);
    const auto k = next_unused(all_aug_kinds().back(), used);
    if (!k) break;
    ops.push_back(magnitude_to_params(*k, 0.2, catalog_));
  }
  return Policy::of(std::move(ops));
}

Policy MockOracleProvider::harden(const Policy& p) const {
  Policy out = p;
  for (auto& op : out.ops) {
    for (const auto& spec : catalog_.params(op.kind)) {
      if (spec.discrete) continue;
      auto& v = op.params[spec.name];
      v = std::clamp(v + (rules_.harden_factor - 1.0) * (spec.destructive_end() - v), spec.lower, spec.upper);
    }
  }
  return out;
}

Policy MockOracleProvider::soften(const Policy& p) const {
  Policy out = p;
  for (auto& op : out.ops) {
    for (const auto& spec : catalog_.params(op.kind)) {
      auto& v = op.params[spec.name];
      const double target = spec.identity_value.value_or(spec.lower);
      v += (1.0 - rules_.soften_factor) * (target - v);
      if (spec.discrete) v = std::round(v);
      v = std::clamp(v, spec.lower, spec.upper);
    }
  }
  if (rules_.swap_on_decline && !out.ops.empty()) {
    if (const auto k = next_unused(out.ops[0].kind, kinds_of(out))) out.ops[0] = magnitude_to_params(*k, 0.2, catalog_);
  }
  return out;
}

ProviderReply MockOracleProvider::complete(const std::vector<ChatMessage>& messages) {
  const auto first_user = std::find_if(messages.begin(), messages.end(), [](const auto& m) { return m.role == "user"; });
  if (first_user == messages.end()) throw RuntimeError("ORACLE_BAD_PROMPT", "no user message to answer");
  const std::string& prompt = first_user->content;

  static const std::regex n_re(R"(exactly (\d+) augmentation operations)");
  static const std::regex line_re(R"(^- iteration (\d+) \| validation accuracy ([0-9.]+) \| policy (\{.*\})$)");
  std::smatch m;
  if (!std::regex_search(prompt, m, n_re)) {
    throw RuntimeError("ORACLE_BAD_PROMPT", "prompt does not state the number of operations");
  }
  const int n = std::stoi(m[1].str());

  std::vector<Observed> history;
  std::size_t pos = 0;
  while (pos < prompt.size()) {
    auto end = prompt.find('\n', pos);
    if (end == std::string::npos) end = prompt.size();
    const std::string line = prompt.substr(pos, end - pos);
    pos = end + 1;
    if (line.rfind("- iteration ", 0) != 0) continue;
    if (!std::regex_match(line, m, line_re)) throw RuntimeError("ORACLE_BAD_PROMPT", "unparseable history line: " + line);
    auto parsed = parse_policy(m[3].str(), catalog_, n);
    if (!parsed.ok()) {
      throw RuntimeError("ORACLE_BAD_PROMPT", "unparseable policy in history: " + render_errors(parsed.errors));
    }
    history.push_back({std::stod(m[2].str()), std::move(*parsed.policy)});
  }

  std::string text;
  Policy next;
  if (history.empty()) {
    next = seed_policy(n);
    text = "Starting point: a small rotation, mild blur and a light brightness change.";
  } else {
    const auto& last = history.back();
    const double delta = history.size() > 1 ? last.accuracy - history[history.size() - 2].accuracy : 0.0;
    if (delta >= 0.0) {
      next = harden(last.policy);
      text = fmt::format("Accuracy changed by {:+.4f}; strengthening every operation.", delta);
    } else {
      next = soften(last.policy);
      text = fmt::format("Accuracy changed by {:+.4f}; softening the policy and replacing {} with {}.", delta,
                         to_string(last.policy.ops.front().kind), to_string(next.ops.front().kind));
    }
  }
  const auto reply = reply_text(text, next, catalog_);
  return {reply, estimate_cost(messages, reply, ProviderConfig{})};
}

}  // namespace augloop
