// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>

#include "augloop/error.hpp"
#include "augloop/transforms.hpp"
#include "doctest.h"
#include "generators.hpp"

using namespace augloop;

namespace {

AugOpInstance op1(AugKind kind, std::string name, double value, double p = 1.0) {
  AugOpInstance op;
  op.kind = kind;
  op.params[std::move(name)] = value;
  op.apply_probability = p;
  return op;
}

AugOpInstance flip_op(AugKind kind, double p = 1.0) {
  AugOpInstance op;
  op.kind = kind;
  op.apply_probability = p;
  return op;
}

float max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  float d = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace

TEST_CASE("spec examples for apply_op") {
  SampleRng gen(1);
  auto img = testing::random_image(gen, 9, 13, 3);

  SUBCASE("horizontal flip twice is the identity") {
    SampleRng r1(2), r2(3);
    auto once = apply_op(img, flip_op(AugKind::horizontal_flip), r1);
    CHECK(once != img);
    CHECK(apply_op(once, flip_op(AugKind::horizontal_flip), r2) == img);
  }
  SUBCASE("blur of a constant image stays constant") {
    ImageBuffer flat(16, 16, 1, 0.5f);
    SampleRng r(4);
    auto out = apply_op(flat, op1(AugKind::gaussian_blur, "sigma", 1.0), r);
    for (float v : out.data()) CHECK(std::abs(v - 0.5f) <= 1e-6f);
  }
  SUBCASE("rotate by zero degrees") {
    SampleRng r(5);
    CHECK(apply_op(img, op1(AugKind::rotate, "degrees", 0.0), r) == img);
  }
  SUBCASE("solarize below threshold") {
    ImageBuffer flat(4, 4, 1, 0.5f);
    SampleRng r(6);
    CHECK(apply_op(flat, op1(AugKind::solarize, "threshold", 0.6), r) == flat);
  }
  SUBCASE("posterize keeps the top bits") {
    // floor(0.59 * 255) = 150 = 0b10010110 -> 0b10000000 = 128
    ImageBuffer px(1, 1, 1, 0.59f);
    SampleRng r(7);
    auto out = apply_op(px, op1(AugKind::posterize, "bits", 3), r);
    CHECK(out.at(0, 0, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-6));
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.501961).epsilon(1e-6));
  }
  SUBCASE("invalid op is rejected") {
    SampleRng r(8);
    CHECK_THROWS_AS(apply_op(img, op1(AugKind::rotate, "degrees", 999.0), r), ValidationError);
    CHECK_THROWS_AS(apply_op(img, op1(AugKind::rotate, "angle", 5.0), r), ValidationError);
  }
  SUBCASE("hue on one channel is a recorded no-op") {
    auto gray = testing::random_image(gen, 5, 5, 1);
    KernelCounters counters;
    SampleRng r(9);
    CHECK(apply_op(gray, op1(AugKind::hue, "shift", 0.4), r, &counters) == gray);
    CHECK(counters.warnings.load() == 1);
  }
}

TEST_CASE("identity parameters are exact no-ops") {
  SampleRng gen(21);
  for (int c : {1, 3}) {
    auto img = testing::random_image(gen, 11, 7, c);
    for (AugKind kind : all_aug_kinds()) {
      auto op = identity_op(kind);
      for (std::uint64_t s = 0; s < 20; ++s) {
        SampleRng r(s);
        INFO(to_string(kind));
        CHECK(apply_op(img, op, r) == img);
      }
    }
  }
  // threshold 1 only flips exact ones
  ImageBuffer below(3, 3, 1, 0.999f);
  SampleRng r(1);
  CHECK(apply_op(below, op1(AugKind::solarize, "threshold", 1.0), r) == below);
}

TEST_CASE("range and shape preserved at max magnitude") {
  SampleRng gen(33);
  for (int trial = 0; trial < 40; ++trial) {
    const int c = trial % 2 ? 3 : 1;
    auto img = testing::random_image(gen, 3 + static_cast<int>(gen.uniform_int(12)),
                                     3 + static_cast<int>(gen.uniform_int(12)), c);
    for (AugKind kind : all_aug_kinds()) {
      SampleRng r(gen.next_u64());
      auto out = apply_op(img, testing::max_magnitude_op(kind), r);
      REQUIRE(out.same_shape(img));
      for (float v : out.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
    }
  }
}

TEST_CASE("probability gate") {
  SampleRng gen(3);
  auto img = testing::random_image(gen, 6, 6, 3);
  KernelCounters counters;
  int applied = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    SampleRng r(s);
    if (apply_op(img, flip_op(AugKind::vertical_flip, 0.25), r, &counters) != img) ++applied;
  }
  CHECK(applied == static_cast<int>(counters.invoked_of(AugKind::vertical_flip)));
  CHECK(counters.skipped.load() + counters.total_invoked() == 2000);
  CHECK(applied > 400);
  CHECK(applied < 600);
}

TEST_CASE("apply_policy") {
  SampleRng gen(44);
  auto img = testing::random_image(gen, 10, 12, 3);
  SUBCASE("all gates closed leaves the input") {
    auto p = Policy::of({op1(AugKind::rotate, "degrees", 90, 0.0), flip_op(AugKind::horizontal_flip, 0.0),
                         op1(AugKind::gaussian_blur, "sigma", 2.0, 0.0)});
    CHECK(apply_policy(img, p, {7, 1, 2, 0}) == img);
  }
  SUBCASE("same key gives bit-identical output") {
    SampleRng pr(1);
    for (int i = 0; i < 20; ++i) {
      auto p = testing::random_policy(pr, 3);
      CHECK(apply_policy(img, p, {9, 3, static_cast<std::uint64_t>(i), 0}) ==
            apply_policy(img, p, {9, 3, static_cast<std::uint64_t>(i), 0}));
    }
  }
  SUBCASE("different sample index gives a different draw") {
    auto p = Policy::of({op1(AugKind::rotate, "degrees", 90)});
    CHECK(apply_policy(img, p, {9, 3, 1, 0}) != apply_policy(img, p, {9, 3, 2, 0}));
  }
  SUBCASE("hflip and rotate(0) commute") {
    auto a = Policy::of({flip_op(AugKind::horizontal_flip), op1(AugKind::rotate, "degrees", 0)});
    auto b = Policy::of({op1(AugKind::rotate, "degrees", 0), flip_op(AugKind::horizontal_flip)});
    const auto out_a = apply_policy(img, a, {1, 1, 1, 0});
    const auto out_b = apply_policy(img, b, {1, 1, 1, 0});
    // brute-force reference: mirror by index
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        for (int c = 0; c < 3; ++c) {
          CHECK(out_a.at(y, x, c) == img.at(y, img.width() - 1 - x, c));
          CHECK(out_b.at(y, x, c) == img.at(y, img.width() - 1 - x, c));
        }
      }
    }
  }
}

TEST_CASE("geometric kernels behave geometrically") {
  SUBCASE("rotate by 180 at max is a point reflection when the draw hits 180") {
    // Check the mapping through a draw we can reproduce: same stream, read the angle.
    ImageBuffer img(5, 5, 1, 0.0f);
    img.at(0, 0, 0) = 1.0f;
    SampleRng probe(123);
    probe.uniform();  // gate
    const double angle = probe.uniform(-180.0, 180.0);
    SampleRng r(123);
    auto out = apply_op(img, op1(AugKind::rotate, "degrees", 180.0), r);
    double mass = 0.0;
    for (float v : out.data()) mass += v;
    CHECK(std::abs(angle) <= 180.0);
    CHECK(mass > 0.0);
  }
  SUBCASE("scale_crop of a constant image is constant") {
    ImageBuffer flat(8, 8, 3, 0.25f);
    SampleRng r(5);
    auto out = apply_op(flat, op1(AugKind::scale_crop, "scale_min", 0.08), r);
    CHECK(max_abs_diff(out, flat) <= 1e-6f);
  }
  SUBCASE("erasing zeroes a rectangle of the requested area") {
    ImageBuffer flat(20, 20, 1, 1.0f);
    AugOpInstance op;
    op.kind = AugKind::erasing;
    op.params = {{"area", 0.25}, {"aspect", 1.0}};
    SampleRng r(2);
    auto out = apply_op(flat, op, r);
    int zeros = 0;
    for (float v : out.data()) zeros += v == 0.0f;
    CHECK(zeros == 100);
  }
}

TEST_CASE("equalize") {
  SampleRng gen(8);
  auto img = testing::random_image(gen, 16, 16, 3);
  for (auto& v : img.data()) v = v * 0.3f + 0.2f;  // squeeze the histogram
  SampleRng r1(1), r2(2);
  AugOpInstance eq;
  eq.kind = AugKind::equalize;
  auto once = apply_op(img, eq, r1);
  auto twice = apply_op(once, eq, r2);
  CHECK(max_abs_diff(once, twice) <= 1.0f / 255.0f + 1e-6f);
  float lo = 1.0f, hi = 0.0f;
  for (float v : once.data()) lo = std::min(lo, v), hi = std::max(hi, v);
  CHECK(lo == 0.0f);
  CHECK(hi == 1.0f);
}

TEST_CASE("photometric kernels") {
  SUBCASE("saturation leaves gray pixels alone") {
    ImageBuffer gray(4, 4, 3, 0.4f);
    SampleRng r(3);
    CHECK(max_abs_diff(apply_op(gray, op1(AugKind::saturation, "strength", 1.0), r), gray) <= 1e-6f);
  }
  SUBCASE("hue rotates a saturated color") {
    ImageBuffer red(1, 1, 3, 0.0f);
    red.at(0, 0, 0) = 1.0f;
    SampleRng r(17);
    auto out = apply_op(red, op1(AugKind::hue, "shift", 0.5), r);
    CHECK(std::max({out.at(0, 0, 0), out.at(0, 0, 1), out.at(0, 0, 2)}) == doctest::Approx(1.0f));
  }
  SUBCASE("sharpness of a constant image is constant") {
    ImageBuffer flat(6, 6, 1, 0.7f);
    SampleRng r(4);
    CHECK(max_abs_diff(apply_op(flat, op1(AugKind::sharpness, "strength", 1.0), r), flat) <= 1e-6f);
  }
}

TEST_CASE("codec") {
  SUBCASE("1x1 PGM with value 255") {
    const std::string pgm = "P5\n1 1\n255\n\xff";
    auto img = decode_image({reinterpret_cast<const std::uint8_t*>(pgm.data()), pgm.size()});
    CHECK(img.channels() == 1);
    CHECK(img.at(0, 0, 0) == 1.0f);
  }
  SUBCASE("value 128 round trips") {
    ImageBuffer px(1, 1, 1, 128.0f / 255.0f);
    CHECK(px.at(0, 0, 0) == doctest::Approx(0.501961).epsilon(1e-6));
    CHECK(to_u8(px.at(0, 0, 0)) == 128);
  }
  SUBCASE("round trip on the 8-bit grid for PPM and PNG") {
    SampleRng gen(99);
    for (int trial = 0; trial < 10; ++trial) {
      const int c = trial % 2 ? 3 : 1;
      std::vector<std::uint8_t> raw;
      const int h = 1 + static_cast<int>(gen.uniform_int(9));
      const int w = 1 + static_cast<int>(gen.uniform_int(9));
      std::string header = "P" + std::to_string(c == 1 ? 5 : 6) + "\n" + std::to_string(w) + " " +
                           std::to_string(h) + "\n255\n";
      raw.assign(header.begin(), header.end());
      for (int i = 0; i < h * w * c; ++i) raw.push_back(static_cast<std::uint8_t>(gen.uniform_int(256)));
      auto img = decode_image(raw);
      CHECK(encode_image(img, ImageFormat::pnm) == raw);
      auto png = encode_image(img, ImageFormat::png);
      CHECK(decode_image(png) == img);
    }
  }
  SUBCASE("comment lines in PNM headers") {
    const std::string pgm = "P5\n# made by hand\n2 1\n255\n\x10\x20";
    auto img = decode_image({reinterpret_cast<const std::uint8_t*>(pgm.data()), pgm.size()});
    CHECK(img.width() == 2);
  }
  SUBCASE("errors") {
    auto bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
    auto code_of = [](const std::vector<std::uint8_t>& b) {
      try {
        decode_image(b);
      } catch (const ValidationError& e) {
        return e.code();
      }
      return std::string("none");
    };
    CHECK(code_of(bytes("P5\n2 2\n65535\n\x01\x02")) == "UNSUPPORTED_IMAGE");
    CHECK(code_of(bytes("P6\n2 2\n255\n\x01\x02")) == "TRUNCATED_IMAGE");
    CHECK(code_of(bytes("GIF89a")) == "UNSUPPORTED_IMAGE");
    auto png = encode_image(ImageBuffer(4, 4, 3, 0.5f), ImageFormat::png);
    png.resize(png.size() - 20);
    CHECK(code_of(png) == "TRUNCATED_IMAGE");
    auto png16 = encode_image(ImageBuffer(4, 4, 1, 0.5f), ImageFormat::png);
    png16[24] = 16;  // claim 16-bit depth
    CHECK(code_of(png16) == "UNSUPPORTED_IMAGE");
    auto rgba = encode_image(ImageBuffer(4, 4, 1, 0.5f), ImageFormat::png);
    rgba[25] = 6;
    CHECK(code_of(rgba) == "UNSUPPORTED_IMAGE");
  }
}
