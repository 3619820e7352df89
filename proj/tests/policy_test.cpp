// SPDX-License-Identifier: Apache-2.0
#include <set>
#include <string>

#include "augloop/error.hpp"
#include "augloop/policy.hpp"
#include "doctest.h"
#include "generators.hpp"

using namespace augloop;

namespace {

AugOpInstance rotate_op(double degrees) {
  AugOpInstance op;
  op.kind = AugKind::rotate;
  op.params["degrees"] = degrees;
  return op;
}

AugOpInstance blur_op(double sigma) {
  AugOpInstance op;
  op.kind = AugKind::gaussian_blur;
  op.params["sigma"] = sigma;
  return op;
}

}  // namespace

TEST_CASE("catalog has exactly the sixteen kinds in alphabetical order") {
  const auto& kinds = all_aug_kinds();
  REQUIRE(kinds.size() == 16);
  for (std::size_t i = 1; i < kinds.size(); ++i) CHECK(to_string(kinds[i - 1]) < to_string(kinds[i]));
  for (AugKind k : kinds) {
    CHECK(aug_kind_from_string(to_string(k)) == k);
    for (const auto& spec : Catalog::standard().params(k)) {
      CHECK(spec.lower < spec.upper);
      if (spec.identity_value) {
        CHECK(spec.lower <= *spec.identity_value);
        CHECK(*spec.identity_value <= spec.upper);
      }
    }
  }
  CHECK(Catalog::standard().find_param(AugKind::rotate, "degrees")->upper == 180.0);
}

TEST_CASE("validate_policy") {
  const auto& cat = Catalog::standard();
  SUBCASE("two valid ops") {
    CHECK(validate_policy(Policy::of({rotate_op(15), blur_op(1.0)}), cat, 2).ok());
  }
  SUBCASE("count mismatch") {
    auto report = validate_policy(Policy::of({rotate_op(15), blur_op(1.0), rotate_op(3)}), cat, 2);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].reason == "count mismatch: 3 ≠ 2");
  }
  SUBCASE("rotate out of range") {
    auto report = validate_policy(Policy::of({rotate_op(400)}), cat, 1);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].op_index == 0);
    CHECK(report.violations[0].field == "degrees");
    CHECK(report.violations[0].reason == "rotate.degrees out of range [0,180]");
  }
  SUBCASE("every violation listed") {
    auto bad = rotate_op(-1);
    bad.apply_probability = 1.5;
    bad.params["bogus"] = 1;
    AugOpInstance poster;
    poster.kind = AugKind::posterize;
    poster.params["bits"] = 3.5;
    auto report = validate_policy(Policy::of({bad, poster}), cat, 2);
    CHECK(report.violations.size() == 4);
  }
  SUBCASE("duplicate kinds are allowed") {
    CHECK(validate_policy(Policy::of({rotate_op(5), rotate_op(10)}), cat, 2).ok());
  }
}

TEST_CASE("canonical_serialize") {
  auto p = Policy::of({rotate_op(15), blur_op(1.0)});
  const auto text = canonical_serialize(p);
  CHECK(text ==
        R"({"n":2,"ops":[{"kind":"rotate","p":1.000000,"params":{"degrees":15.000000}},)"
        R"({"kind":"gaussian_blur","p":1.000000,"params":{"sigma":1.000000}}]})");

  SUBCASE("structurally equal policies give identical bytes") {
    auto q = Policy::of({rotate_op(15), blur_op(1.0)});
    CHECK(canonical_serialize(q) == text);
  }
  SUBCASE("six-digit rendering") {
    AugOpInstance b;
    b.kind = AugKind::brightness;
    b.params["strength"] = 0.1 + 0.2;
    CHECK(b.params["strength"] != 0.3);
    CHECK(canonical_serialize(Policy::of({b})).find("\"strength\":0.300000") != std::string::npos);
    CHECK(format_real(-0.0000001) == "0.000000");
  }
  SUBCASE("invalid policy refused") {
    CHECK_THROWS_AS(canonical_serialize(Policy::of({rotate_op(400)})), ValidationError);
  }
}

TEST_CASE("parse_policy examples") {
  const auto& cat = Catalog::standard();
  SUBCASE("round trip of canonical text") {
    auto p = Policy::of({rotate_op(15), blur_op(1.0)});
    auto out = parse_policy(canonical_serialize(p), cat, 2);
    REQUIRE(out.ok());
    CHECK(*out.policy == p);
  }
  SUBCASE("unknown kind") {
    auto out = parse_policy(R"({"n":1,"ops":[{"kind":"AutoContrast","params":{},"p":1}]})", cat, 1);
    REQUIRE_FALSE(out.ok());
    REQUIRE(out.errors.size() == 1);
    CHECK(out.errors[0].code == ParseErrorCode::unknown_kind);
    CHECK(out.errors[0].message.find("\"AutoContrast\"") != std::string::npos);
  }
  SUBCASE("missing param") {
    auto out = parse_policy(R"({"n":1,"ops":[{"kind":"rotate","params":{},"p":1}]})", cat, 1);
    REQUIRE(out.errors.size() == 1);
    CHECK(out.errors[0].code == ParseErrorCode::missing_param);
    CHECK(out.errors[0].op_index == 0);
    CHECK(out.errors[0].field == "ops[0].params.degrees");
  }
  SUBCASE("syntax error carries a byte position") {
    auto out = parse_policy(R"({"n":1,"ops":[)", cat, 1);
    REQUIRE(out.errors.size() == 1);
    CHECK(out.errors[0].code == ParseErrorCode::malformed_syntax);
    CHECK(out.errors[0].position != std::string::npos);
  }
  SUBCASE("p defaults to one") {
    auto out = parse_policy(R"({"n":1,"ops":[{"kind":"horizontal_flip","params":{}}]})", cat, 1);
    REQUIRE(out.ok());
    CHECK(out.policy->ops[0].apply_probability == 1.0);
  }
  SUBCASE("distinct codes per failure") {
    CHECK(parse_policy(R"({"n":1,"ops":[{"kind":"rotate","params":{"degrees":5,"x":1}}]})", cat, 1)
              .has(ParseErrorCode::extra_param));
    CHECK(parse_policy(R"({"n":1,"ops":[{"kind":"rotate","params":{"degrees":500}}]})", cat, 1)
              .has(ParseErrorCode::out_of_range));
    CHECK(parse_policy(R"({"n":1,"ops":[{"kind":"posterize","params":{"bits":4.5}}]})", cat, 1)
              .has(ParseErrorCode::not_integral));
    CHECK(parse_policy(R"({"n":2,"ops":[{"kind":"rotate","params":{"degrees":5}}]})", cat, 2)
              .has(ParseErrorCode::count_mismatch));
    CHECK(parse_policy(R"([1,2])", cat, 1).has(ParseErrorCode::schema));
  }
  SUBCASE("render_errors is one line per error") {
    auto out = parse_policy(R"({"n":1,"ops":[{"kind":"Foo"},{"kind":"Bar"}]})", cat, 1);
    const auto text = render_errors(out.errors);
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(out.errors.size()));
    CHECK(text.find("[UNKNOWN_KIND] ops[0].kind") != std::string::npos);
  }
}

TEST_CASE("magnitude_to_params examples") {
  CHECK(magnitude_to_params(AugKind::rotate, 0.0).param("degrees") == 0.0);
  CHECK(magnitude_to_params(AugKind::rotate, 1.0).param("degrees") == 180.0);
  // round(8 + 0.5 * (1 - 8)) = round(4.5) = 5
  CHECK(magnitude_to_params(AugKind::posterize, 0.5).param("bits") == 5.0);
  CHECK(magnitude_to_params(AugKind::solarize, 1.0).param("threshold") == 0.0);
  CHECK(magnitude_to_params(AugKind::horizontal_flip, 0.3).apply_probability == doctest::Approx(0.3));
  CHECK(magnitude_to_params(AugKind::rotate, 0.3).apply_probability == 1.0);
  CHECK_THROWS_AS(magnitude_to_params(AugKind::rotate, 1.5), ValidationError);
  CHECK_THROWS_AS(magnitude_to_params(AugKind::rotate, -0.1), ValidationError);
}

TEST_CASE("property: round trip over random valid policies") {
  SampleRng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    auto p = testing::random_policy(rng, n);
    REQUIRE(validate_policy(p, Catalog::standard(), n).ok());
    const auto text = canonical_serialize(p);
    auto parsed = parse_policy(text, Catalog::standard(), n);
    REQUIRE(parsed.ok());
    CHECK(*parsed.policy == p);
    CHECK(canonical_serialize(*parsed.policy) == text);
  }
}

TEST_CASE("property: magnitude monotonicity and validity") {
  for (AugKind kind : all_aug_kinds()) {
    for (int i = 0; i < 50; ++i) {
      const double m1 = i / 50.0;
      const double m2 = (i + 1) / 50.0;
      auto a = magnitude_to_params(kind, m1);
      auto b = magnitude_to_params(kind, m2);
      CHECK(validate_policy(Policy::of({a}), Catalog::standard(), 1).ok());
      for (const auto& spec : Catalog::standard().params(kind)) {
        if (!spec.identity_value || spec.discrete) continue;
        CHECK(std::abs(a.param(spec.name) - *spec.identity_value) <= std::abs(b.param(spec.name) - *spec.identity_value));
      }
    }
  }
}

TEST_CASE("property: closed catalog under fuzzed kind names") {
  SampleRng rng(5);
  std::set<std::string> known;
  for (AugKind k : all_aug_kinds()) known.insert(std::string(to_string(k)));
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz_ABCZ0";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string name;
    if (trial % 4 == 0) {
      // mutate a real name by one character
      name = std::string(to_string(all_aug_kinds()[rng.uniform_int(16)]));
      name[rng.uniform_int(name.size())] = alphabet[rng.uniform_int(alphabet.size())];
    } else {
      const auto len = 1 + rng.uniform_int(16);
      for (std::uint64_t i = 0; i < len; ++i) name += alphabet[rng.uniform_int(alphabet.size())];
    }
    const std::string text = R"({"n":1,"ops":[{"kind":")" + name + R"(","params":{}}]})";
    auto out = parse_policy(text, Catalog::standard(), 1);
    if (known.count(name)) {
      CHECK(aug_kind_from_string(name).has_value());
    } else {
      CHECK_FALSE(out.ok());
      CHECK(out.has(ParseErrorCode::unknown_kind));
      CHECK_FALSE(aug_kind_from_string(name).has_value());
    }
  }
}
