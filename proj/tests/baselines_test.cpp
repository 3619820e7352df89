// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>

#include "augloop/baselines.hpp"
#include "augloop/error.hpp"
#include "doctest.h"
#include "generators.hpp"

using namespace augloop;

TEST_CASE("trivial augment invokes exactly one kernel per image") {
  SampleRng gen(1);
  auto img = testing::random_image(gen, 6, 6, 3);
  KernelCounters counters;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto before = counters.total_invoked();
    apply_baseline(img, {BaselineStrategy::trivial}, {3, 1, i, 0}, &counters);
    REQUIRE(counters.total_invoked() == before + 1);
  }
  CHECK(counters.skipped.load() == 0);
}

TEST_CASE("trivial augment kind frequencies are uniform") {
  // 16,000 draws, 16 kinds: chi-square with 15 dof, p > 0.01 <=> stat < 30.578
  ImageBuffer img(4, 4, 1, 0.5f);
  KernelCounters counters;
  for (std::uint64_t i = 0; i < 16000; ++i) apply_baseline(img, {BaselineStrategy::trivial}, {77, 0, i, 0}, &counters);
  double stat = 0.0;
  for (AugKind k : all_aug_kinds()) {
    const double observed = static_cast<double>(counters.invoked_of(k));
    stat += (observed - 1000.0) * (observed - 1000.0) / 1000.0;
  }
  CHECK(stat < 30.578);
}

TEST_CASE("seeded determinism for every strategy") {
  SampleRng gen(2);
  auto img = testing::random_image(gen, 12, 12, 3);
  for (auto s : {BaselineStrategy::none, BaselineStrategy::trivial, BaselineStrategy::randaugment,
                 BaselineStrategy::augmix}) {
    BaselineConfig cfg;
    cfg.strategy = s;
    for (std::uint64_t i = 0; i < 30; ++i) {
      auto a = apply_baseline(img, cfg, {5, 2, i, 0});
      auto b = apply_baseline(img, cfg, {5, 2, i, 0});
      CHECK(a == b);
      CHECK(a.same_shape(img));
      for (float v : a.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
    }
  }
}

TEST_CASE("randaugment") {
  SampleRng gen(3);
  auto img = testing::random_image(gen, 8, 8, 3);
  SUBCASE("n=2 gives exactly two kernel invocations") {
    BaselineConfig cfg{BaselineStrategy::randaugment, 2, 9};
    for (std::uint64_t i = 0; i < 200; ++i) {
      KernelCounters counters;
      apply_baseline(img, cfg, {1, 1, i, 0}, &counters);
      CHECK(counters.total_invoked() == 2);
    }
  }
  SUBCASE("magnitude 0 is the identity for ops with exact identities") {
    BaselineConfig cfg{BaselineStrategy::randaugment, 1, 0};
    int checked = 0;
    for (std::uint64_t i = 0; i < 300; ++i) {
      KernelCounters counters;
      auto out = apply_baseline(img, cfg, {4, 0, i, 0}, &counters);
      for (AugKind k : all_aug_kinds()) {
        if (counters.invoked_of(k) == 0) continue;
        if (identity_op(k).apply_probability == 1.0) {
          INFO(to_string(k));
          CHECK(out == img);
          ++checked;
        }
      }
    }
    CHECK(checked > 100);
  }
  SUBCASE("magnitude 30 rotate angle spans [-180, 180]") {
    CHECK(magnitude_to_params(AugKind::rotate, 30 / 30.0).param("degrees") == 180.0);
    // Reproduce the draw sequence of a one-op RandAugment: kind, gate, angle.
    double widest = 0.0;
    int rotates = 0;
    for (std::uint64_t i = 0; i < 4000; ++i) {
      SampleRng rng(StreamKey{8, 0, i, 0});
      if (static_cast<AugKind>(rng.uniform_int(kAugKindCount)) != AugKind::rotate) continue;
      ++rotates;
      rng.uniform();
      const double angle = rng.uniform(-180.0, 180.0);
      CHECK(angle >= -180.0);
      CHECK(angle <= 180.0);
      widest = std::max(widest, std::abs(angle));
    }
    CHECK(rotates > 150);
    CHECK(widest > 170.0);
  }
}

TEST_CASE("augmix") {
  SampleRng gen(4);
  auto img = testing::random_image(gen, 10, 10, 3);
  BaselineConfig cfg{BaselineStrategy::augmix};

  SUBCASE("skip forced to one returns the input") {
    SampleRng r(1);
    auto draw = draw_augmix(augmix_pool(), cfg, r);
    draw.skip = 1.0;
    CHECK(apply_augmix(img, draw, r) == img);
  }
  SUBCASE("degenerate mixture is a single chain") {
    AugMixDraw draw;
    draw.weights = {1.0, 0.0, 0.0};
    draw.skip = 0.0;
    AugOpInstance flip;
    flip.kind = AugKind::horizontal_flip;
    AugOpInstance rot = magnitude_to_params(AugKind::rotate, 0.7);
    draw.chains = {{flip}, {rot}, {rot, flip}};
    SampleRng r(2), r2(3);
    CHECK(apply_augmix(img, draw, r) == apply_op(img, flip, r2));
  }
  SUBCASE("draw invariants") {
    SampleRng r(5);
    for (int i = 0; i < 500; ++i) {
      auto draw = draw_augmix(augmix_pool(), cfg, r);
      CHECK(std::abs(std::accumulate(draw.weights.begin(), draw.weights.end(), 0.0) - 1.0) <= 1e-9);
      CHECK(draw.skip >= 0.0);
      CHECK(draw.skip <= 1.0);
      REQUIRE(draw.chains.size() == 3);
      for (const auto& chain : draw.chains) {
        CHECK(chain.size() >= 1);
        CHECK(chain.size() <= 3);
        for (const auto& op : chain) CHECK(op.kind != AugKind::erasing);
      }
    }
  }
  SUBCASE("constant image stays constant under constant-preserving chains") {
    // Kinds whose kernels map a constant image to itself.
    const std::vector<AugKind> pool = {AugKind::contrast,    AugKind::equalize,  AugKind::gaussian_blur,
                                       AugKind::horizontal_flip, AugKind::hue,   AugKind::rotate,
                                       AugKind::saturation,  AugKind::scale_crop, AugKind::sharpness,
                                       AugKind::shear,       AugKind::translate, AugKind::vertical_flip};
    ImageBuffer flat(9, 9, 3, 0.37f);
    SampleRng r(6);
    for (int i = 0; i < 300; ++i) {
      auto draw = draw_augmix(pool, cfg, r);
      auto out = apply_augmix(flat, draw, r);
      for (float v : out.data()) REQUIRE(std::abs(v - 0.37f) <= 1e-6f);
    }
  }
  SUBCASE("config invariants") {
    CHECK_NOTHROW(cfg.validate());
    BaselineConfig bad = cfg;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.magnitude = 31;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.chains = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    CHECK_THROWS_AS(baseline_strategy_from_string("autoaugment"), ValidationError);
  }
}

TEST_CASE("none strategy never touches kernels") {
  SampleRng gen(5);
  auto img = testing::random_image(gen, 5, 5, 1);
  KernelCounters counters;
  for (std::uint64_t i = 0; i < 100; ++i) CHECK(apply_baseline(img, {}, {1, 1, i, 0}, &counters) == img);
  CHECK(counters.total_invoked() == 0);
  CHECK(counters.skipped.load() == 0);
}
