// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace augloop {

// Declaration order is alphabetical by wire name; canonical iteration and
// the mock oracle's "next unused kind" rule both rely on it.
enum class AugKind {
  brightness,
  contrast,
  equalize,
  erasing,
  gaussian_blur,
  horizontal_flip,
  hue,
  posterize,
  rotate,
  saturation,
  scale_crop,
  sharpness,
  shear,
  solarize,
  translate,
  vertical_flip,
};

inline constexpr std::size_t kAugKindCount = 16;

std::string_view to_string(AugKind kind);
std::optional<AugKind> aug_kind_from_string(std::string_view name);
const std::array<AugKind, kAugKindCount>& all_aug_kinds();

struct ParamSpec {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  /// Value that makes the op a no-op. Absent for params like erasing.area.
  std::optional<double> identity_value;
  bool discrete = false;

  /// End of the range that magnitude (and oracle hardening) moves toward:
  /// the lower bound when the identity sits at the upper bound, else upper.
  double destructive_end() const;
};

struct AugOpInstance {
  AugKind kind = AugKind::rotate;
  std::map<std::string, double> params;
  double apply_probability = 1.0;

  double param(const std::string& name) const;
};

/// Equality on the canonical 6-digit grid, so that a value and its
/// serialized form compare equal.
bool operator==(const AugOpInstance& a, const AugOpInstance& b);

struct Policy {
  std::vector<AugOpInstance> ops;
  int n_declared = 0;

  static Policy of(std::vector<AugOpInstance> ops);
  friend bool operator==(const Policy&, const Policy&) = default;
};

class Catalog {
 public:
  /// The fixed 16-kind catalog shipped with this version.
  static const Catalog& standard();

  const std::vector<ParamSpec>& params(AugKind kind) const;
  const ParamSpec* find_param(AugKind kind, std::string_view name) const;
  bool probability_only(AugKind kind) const { return params(kind).empty(); }
  const std::string& version() const { return version_; }

  /// Human-readable listing of kinds and ranges, one kind per line.
  std::string describe() const;

 private:
  Catalog();
  std::array<std::vector<ParamSpec>, kAugKindCount> entries_;
  std::string version_;
};

struct Violation {
  int op_index = -1;  // -1 for policy-level problems
  std::string field;
  std::string reason;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

ValidationReport validate_policy(const Policy& policy, const Catalog& catalog, int n_required);

/// Deterministic JSON text: keys sorted, reals with exactly six fractional
/// digits, no whitespace. Throws ValidationError on an invalid policy.
std::string canonical_serialize(const Policy& policy, const Catalog& catalog = Catalog::standard());

/// Fixed six-digit rendering used everywhere reals hit text.
std::string format_real(double value);

enum class ParseErrorCode {
  malformed_syntax,
  schema,
  unknown_kind,
  missing_param,
  extra_param,
  out_of_range,
  not_integral,
  count_mismatch,
};

std::string_view to_string(ParseErrorCode code);

struct ParseError {
  ParseErrorCode code;
  int op_index = -1;
  std::string field;  // JSON path, e.g. "ops[0].params.degrees"
  std::size_t position = std::string::npos;  // byte offset for syntax errors
  std::string message;
};

using ParseErrorList = std::vector<ParseError>;

/// Renders errors one per line in the form used inside repair prompts.
std::string render_errors(const ParseErrorList& errors);

struct ParseOutcome {
  std::optional<Policy> policy;
  ParseErrorList errors;

  bool ok() const { return policy.has_value(); }
  bool has(ParseErrorCode code) const;
};

ParseOutcome parse_policy(std::string_view text, const Catalog& catalog, int n_required);

/// RandAugment-style magnitude mapping, m in [0,1]. Probability-only kinds
/// get apply_probability = m; every other kind gets apply_probability 1.
AugOpInstance magnitude_to_params(AugKind kind, double m, const Catalog& catalog = Catalog::standard());

/// An exact no-op instance: params at identity with probability 1, or
/// probability 0 for kinds that have no identity parameterization.
AugOpInstance identity_op(AugKind kind, const Catalog& catalog = Catalog::standard());

}  // namespace augloop
