// SPDX-License-Identifier: Apache-2.0
#include "augloop/policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "augloop/error.hpp"

namespace augloop {

namespace {

constexpr std::array<std::string_view, kAugKindCount> kKindNames = {
    "brightness", "contrast",  "equalize", "erasing",    "gaussian_blur", "horizontal_flip",
    "hue",        "posterize", "rotate",   "saturation", "scale_crop",    "sharpness",
    "shear",      "solarize",  "translate", "vertical_flip",
};

std::size_t index_of(AugKind kind) { return static_cast<std::size_t>(kind); }

std::string fmt_bound(double v) { return fmt::format("{:g}", v); }

std::string op_path(int op_index) { return fmt::format("ops[{}]", op_index); }

// Values on the canonical grid; two reals are "the same" iff these match.
long long grid(double v) { return std::llround(v * 1e6); }

bool is_integral(double v) { return std::nearbyint(v) == v; }

}  // namespace

std::string_view to_string(AugKind kind) { return kKindNames[index_of(kind)]; }

std::optional<AugKind> aug_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<AugKind>(i);
  }
  return std::nullopt;
}

const std::array<AugKind, kAugKindCount>& all_aug_kinds() {
  static const auto kinds = [] {
    std::array<AugKind, kAugKindCount> out{};
    for (std::size_t i = 0; i < kAugKindCount; ++i) out[i] = static_cast<AugKind>(i);
    return out;
  }();
  return kinds;
}

double ParamSpec::destructive_end() const {
  if (identity_value && *identity_value == upper) return lower;
  return upper;
}

double AugOpInstance::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw ValidationError("MISSING_PARAM", fmt::format("{} has no param '{}'", to_string(kind), name));
  }
  return it->second;
}

bool operator==(const AugOpInstance& a, const AugOpInstance& b) {
  if (a.kind != b.kind || grid(a.apply_probability) != grid(b.apply_probability)) return false;
  if (a.params.size() != b.params.size()) return false;
  for (auto ia = a.params.begin(), ib = b.params.begin(); ia != a.params.end(); ++ia, ++ib) {
    if (ia->first != ib->first || grid(ia->second) != grid(ib->second)) return false;
  }
  return true;
}

Policy Policy::of(std::vector<AugOpInstance> ops) {
  Policy p;
  p.n_declared = static_cast<int>(ops.size());
  p.ops = std::move(ops);
  return p;
}

//------------------------------------------------------------------------------
// Catalog

Catalog::Catalog() : version_("augloop-catalog/1") {
  auto set = [this](AugKind kind, std::vector<ParamSpec> specs) { entries_[index_of(kind)] = std::move(specs); };
  set(AugKind::brightness, {{"strength", 0.0, 1.0, 0.0, false}});
  set(AugKind::contrast, {{"strength", 0.0, 1.0, 0.0, false}});
  set(AugKind::equalize, {});
  set(AugKind::erasing, {{"area", 0.02, 0.33, std::nullopt, false}, {"aspect", 0.3, 3.3, std::nullopt, false}});
  set(AugKind::gaussian_blur, {{"sigma", 0.0, 3.0, 0.0, false}});
  set(AugKind::horizontal_flip, {});
  set(AugKind::hue, {{"shift", 0.0, 0.5, 0.0, false}});
  set(AugKind::posterize, {{"bits", 1.0, 8.0, 8.0, true}});
  set(AugKind::rotate, {{"degrees", 0.0, 180.0, 0.0, false}});
  set(AugKind::saturation, {{"strength", 0.0, 1.0, 0.0, false}});
  set(AugKind::scale_crop, {{"scale_min", 0.08, 1.0, 1.0, false}});
  set(AugKind::shear, {{"degrees", 0.0, 45.0, 0.0, false}});
  set(AugKind::sharpness, {{"strength", 0.0, 1.0, 0.0, false}});
  set(AugKind::solarize, {{"threshold", 0.0, 1.0, 1.0, false}});
  set(AugKind::translate, {{"tx", 0.0, 0.5, 0.0, false}, {"ty", 0.0, 0.5, 0.0, false}});
  set(AugKind::vertical_flip, {});
}

const Catalog& Catalog::standard() {
  static const Catalog catalog;
  return catalog;
}

const std::vector<ParamSpec>& Catalog::params(AugKind kind) const { return entries_[index_of(kind)]; }

const ParamSpec* Catalog::find_param(AugKind kind, std::string_view name) const {
  for (const auto& spec : params(kind)) {
    if (spec.name == name) return &spec;
  }
  return nullptr;
}

std::string Catalog::describe() const {
  std::string out;
  for (AugKind kind : all_aug_kinds()) {
    out += fmt::format("- {}:", to_string(kind));
    const auto& specs = params(kind);
    if (specs.empty()) out += " no params (strength is controlled by \"p\" alone)";
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& s = specs[i];
      out += fmt::format("{} {} in [{}, {}]", i == 0 ? "" : ",", s.name, fmt_bound(s.lower), fmt_bound(s.upper));
      if (s.discrete) out += " (integer)";
      if (s.identity_value) out += fmt::format(" (no-op at {})", fmt_bound(*s.identity_value));
    }
    out += "\n";
  }
  return out;
}

//------------------------------------------------------------------------------
// Validation

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& v : violations) {
    if (v.op_index >= 0) {
      out += fmt::format("op {}: {}: {}\n", v.op_index, v.field, v.reason);
    } else {
      out += fmt::format("{}: {}\n", v.field, v.reason);
    }
  }
  return out;
}

ValidationReport validate_policy(const Policy& policy, const Catalog& catalog, int n_required) {
  ValidationReport report;
  auto add = [&](int idx, std::string field, std::string reason) {
    report.violations.push_back({idx, std::move(field), std::move(reason)});
  };

  const int count = static_cast<int>(policy.ops.size());
  if (count != n_required) add(-1, "ops", fmt::format("count mismatch: {} ≠ {}", count, n_required));
  if (policy.n_declared != count) {
    add(-1, "n", fmt::format("declared n {} does not match {} ops", policy.n_declared, count));
  }

  for (int i = 0; i < count; ++i) {
    const auto& op = policy.ops[static_cast<std::size_t>(i)];
    const std::string kind_name{to_string(op.kind)};
    if (!(op.apply_probability >= 0.0 && op.apply_probability <= 1.0)) {
      add(i, "p", fmt::format("{}.p out of range [0,1]", kind_name));
    }
    const auto& specs = catalog.params(op.kind);
    for (const auto& spec : specs) {
      auto it = op.params.find(spec.name);
      if (it == op.params.end()) {
        add(i, spec.name, fmt::format("{}.{} missing", kind_name, spec.name));
        continue;
      }
      const double v = it->second;
      if (!(v >= spec.lower && v <= spec.upper)) {
        add(i, spec.name,
            fmt::format("{}.{} out of range [{},{}]", kind_name, spec.name, fmt_bound(spec.lower), fmt_bound(spec.upper)));
      } else if (spec.discrete && !is_integral(v)) {
        add(i, spec.name, fmt::format("{}.{} must be an integer", kind_name, spec.name));
      }
    }
    for (const auto& [name, value] : op.params) {
      if (!catalog.find_param(op.kind, name)) add(i, name, fmt::format("{} has no param '{}'", kind_name, name));
    }
  }
  return report;
}

//------------------------------------------------------------------------------
// Canonical serialization

std::string format_real(double value) {
  std::string s = fmt::format("{:.6f}", value);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string canonical_serialize(const Policy& policy, const Catalog& catalog) {
  auto report = validate_policy(policy, catalog, policy.n_declared);
  if (!report.ok()) {
    throw ValidationError("INVALID_POLICY", "refusing to serialize invalid policy:\n" + report.to_string());
  }
  std::string out = fmt::format("{{\"n\":{},\"ops\":[", policy.n_declared);
  for (std::size_t i = 0; i < policy.ops.size(); ++i) {
    const auto& op = policy.ops[i];
    if (i) out += ',';
    // std::map keeps params sorted by name.
    out += fmt::format("{{\"kind\":\"{}\",\"p\":{},\"params\":{{", to_string(op.kind), format_real(op.apply_probability));
    bool first = true;
    for (const auto& [name, value] : op.params) {
      if (!first) out += ',';
      first = false;
      out += fmt::format("\"{}\":{}", name, format_real(value));
    }
    out += "}}";
  }
  out += "]}";
  return out;
}

//------------------------------------------------------------------------------
// Parsing

std::string_view to_string(ParseErrorCode code) {
  switch (code) {
    case ParseErrorCode::malformed_syntax: return "MALFORMED_SYNTAX";
    case ParseErrorCode::schema: return "SCHEMA_VIOLATION";
    case ParseErrorCode::unknown_kind: return "UNKNOWN_KIND";
    case ParseErrorCode::missing_param: return "MISSING_PARAM";
    case ParseErrorCode::extra_param: return "EXTRA_PARAM";
    case ParseErrorCode::out_of_range: return "OUT_OF_RANGE";
    case ParseErrorCode::not_integral: return "NOT_INTEGRAL";
    case ParseErrorCode::count_mismatch: return "COUNT_MISMATCH";
  }
  return "UNKNOWN";
}

std::string render_errors(const ParseErrorList& errors) {
  std::string out;
  for (const auto& e : errors) {
    out += fmt::format("- [{}]", to_string(e.code));
    if (!e.field.empty()) out += fmt::format(" {}", e.field);
    if (e.position != std::string::npos) out += fmt::format(" (byte {})", e.position);
    out += fmt::format(": {}\n", e.message);
  }
  return out;
}

bool ParseOutcome::has(ParseErrorCode code) const {
  return std::any_of(errors.begin(), errors.end(), [code](const ParseError& e) { return e.code == code; });
}

namespace {

using nlohmann::json;

std::optional<long long> as_integer(const json& j) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    double d = j.get<double>();
    if (std::isfinite(d) && is_integral(d)) return static_cast<long long>(d);
  }
  return std::nullopt;
}

void parse_op(const json& jop, int idx, const Catalog& catalog, std::vector<AugOpInstance>& ops, ParseErrorList& errors) {
  const std::string path = op_path(idx);
  auto err = [&](ParseErrorCode code, std::string field, std::string message) {
    errors.push_back({code, idx, std::move(field), std::string::npos, std::move(message)});
  };
  if (!jop.is_object()) {
    err(ParseErrorCode::schema, path, "each op must be an object with \"kind\", \"params\" and \"p\"");
    return;
  }
  bool ok = true;
  for (const auto& [key, _] : jop.items()) {
    if (key != "kind" && key != "params" && key != "p") {
      err(ParseErrorCode::schema, path + "." + key, fmt::format("unexpected key \"{}\"", key));
      ok = false;
    }
  }

  auto jkind = jop.find("kind");
  if (jkind == jop.end() || !jkind->is_string()) {
    err(ParseErrorCode::schema, path + ".kind", "\"kind\" must be a string");
    return;
  }
  const auto name = jkind->get<std::string>();
  auto kind = aug_kind_from_string(name);
  if (!kind) {
    err(ParseErrorCode::unknown_kind, path + ".kind", fmt::format("unknown augmentation kind \"{}\"", name));
    return;
  }

  AugOpInstance op;
  op.kind = *kind;
  if (auto jp = jop.find("p"); jp != jop.end()) {
    if (!jp->is_number()) {
      err(ParseErrorCode::schema, path + ".p", "\"p\" must be a number");
      ok = false;
    } else {
      op.apply_probability = jp->get<double>();
      if (!(op.apply_probability >= 0.0 && op.apply_probability <= 1.0)) {
        err(ParseErrorCode::out_of_range, path + ".p", fmt::format("{}.p out of range [0,1]", name));
        ok = false;
      }
    }
  }

  const auto& specs = catalog.params(op.kind);
  auto jparams = jop.find("params");
  if (jparams == jop.end()) {
    if (!specs.empty()) {
      for (const auto& spec : specs) {
        err(ParseErrorCode::missing_param, path + ".params." + spec.name,
            fmt::format("{} requires param \"{}\"", name, spec.name));
      }
      return;
    }
  } else if (!jparams->is_object()) {
    err(ParseErrorCode::schema, path + ".params", "\"params\" must be an object");
    return;
  } else {
    for (const auto& [key, value] : jparams->items()) {
      if (!catalog.find_param(op.kind, key)) {
        err(ParseErrorCode::extra_param, path + ".params." + key, fmt::format("{} has no param \"{}\"", name, key));
        ok = false;
      }
    }
    for (const auto& spec : specs) {
      const std::string field = path + ".params." + spec.name;
      auto jv = jparams->find(spec.name);
      if (jv == jparams->end()) {
        err(ParseErrorCode::missing_param, field, fmt::format("{} requires param \"{}\"", name, spec.name));
        ok = false;
        continue;
      }
      if (!jv->is_number()) {
        err(ParseErrorCode::schema, field, fmt::format("{}.{} must be a number", name, spec.name));
        ok = false;
        continue;
      }
      const double v = jv->get<double>();
      if (!(v >= spec.lower && v <= spec.upper)) {
        err(ParseErrorCode::out_of_range, field,
            fmt::format("{}.{} out of range [{},{}]", name, spec.name, fmt_bound(spec.lower), fmt_bound(spec.upper)));
        ok = false;
      } else if (spec.discrete && !is_integral(v)) {
        err(ParseErrorCode::not_integral, field, fmt::format("{}.{} must be an integer", name, spec.name));
        ok = false;
      }
      op.params[spec.name] = v;
    }
  }
  if (ok) ops.push_back(std::move(op));
}

}  // namespace

ParseOutcome parse_policy(std::string_view text, const Catalog& catalog, int n_required) {
  ParseOutcome outcome;
  auto& errors = outcome.errors;

  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    errors.push_back({ParseErrorCode::malformed_syntax, -1, "", e.byte, e.what()});
    return outcome;
  }
  if (!doc.is_object()) {
    errors.push_back({ParseErrorCode::schema, -1, "$", std::string::npos,
                      "policy must be a JSON object with keys \"n\" and \"ops\""});
    return outcome;
  }
  for (const auto& [key, _] : doc.items()) {
    if (key != "n" && key != "ops") {
      errors.push_back({ParseErrorCode::schema, -1, key, std::string::npos, fmt::format("unexpected key \"{}\"", key)});
    }
  }

  std::optional<long long> n;
  if (auto jn = doc.find("n"); jn == doc.end()) {
    errors.push_back({ParseErrorCode::schema, -1, "n", std::string::npos, "missing key \"n\""});
  } else if (n = as_integer(*jn); !n) {
    errors.push_back({ParseErrorCode::schema, -1, "n", std::string::npos, "\"n\" must be an integer"});
  }

  auto jops = doc.find("ops");
  if (jops == doc.end() || !jops->is_array()) {
    errors.push_back({ParseErrorCode::schema, -1, "ops", std::string::npos, "\"ops\" must be an array"});
    return outcome;
  }

  std::vector<AugOpInstance> ops;
  const int count = static_cast<int>(jops->size());
  for (int i = 0; i < count; ++i) parse_op((*jops)[static_cast<std::size_t>(i)], i, catalog, ops, errors);

  if (count != n_required) {
    errors.push_back({ParseErrorCode::count_mismatch, -1, "ops", std::string::npos,
                      fmt::format("count mismatch: {} ≠ {} (the policy must contain exactly {} ops)", count,
                                  n_required, n_required)});
  }
  if (n && *n != count) {
    errors.push_back({ParseErrorCode::count_mismatch, -1, "n", std::string::npos,
                      fmt::format("\"n\" is {} but \"ops\" has {} entries", *n, count)});
  }

  if (errors.empty()) {
    Policy p;
    p.n_declared = static_cast<int>(*n);
    p.ops = std::move(ops);
    outcome.policy = std::move(p);
  }
  return outcome;
}

//------------------------------------------------------------------------------
// Magnitude mapping

AugOpInstance magnitude_to_params(AugKind kind, double m, const Catalog& catalog) {
  if (!(m >= 0.0 && m <= 1.0)) {
    throw ValidationError("MAGNITUDE_RANGE", fmt::format("magnitude {} outside [0,1]", m));
  }
  AugOpInstance op;
  op.kind = kind;
  const auto& specs = catalog.params(kind);
  if (specs.empty()) {
    op.apply_probability = m;
    return op;
  }
  for (const auto& spec : specs) {
    double v = 0.0;
    if (spec.identity_value) {
      v = *spec.identity_value + m * (spec.destructive_end() - *spec.identity_value);
    } else {
      v = spec.lower + m * (spec.upper - spec.lower);
    }
    if (spec.discrete) v = std::round(v);
    op.params[spec.name] = std::clamp(v, spec.lower, spec.upper);
  }
  return op;
}

AugOpInstance identity_op(AugKind kind, const Catalog& catalog) {
  AugOpInstance op;
  op.kind = kind;
  const auto& specs = catalog.params(kind);
  bool exact = !specs.empty();
  for (const auto& spec : specs) {
    op.params[spec.name] = spec.identity_value.value_or(spec.lower);
    exact = exact && spec.identity_value.has_value();
  }
  op.apply_probability = exact ? 1.0 : 0.0;
  return op;
}

}  // namespace augloop
