// SPDX-License-Identifier: Apache-2.0
#include "augloop/baselines.hpp"

#include <fmt/format.h>

#include "augloop/error.hpp"

namespace augloop {

std::string_view to_string(BaselineStrategy s) {
  switch (s) {
    case BaselineStrategy::none: return "none";
    case BaselineStrategy::trivial: return "trivial";
    case BaselineStrategy::randaugment: return "randaugment";
    case BaselineStrategy::augmix: return "augmix";
  }
  return "none";
}

BaselineStrategy baseline_strategy_from_string(std::string_view name) {
  for (auto s : {BaselineStrategy::none, BaselineStrategy::trivial, BaselineStrategy::randaugment,
                 BaselineStrategy::augmix}) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("BAD_CONFIG",
                        fmt::format("unknown baseline strategy '{}' (none|trivial|randaugment|augmix)", name));
}

void BaselineConfig::validate() const {
  if (n < 1) throw ValidationError("BAD_CONFIG", "baseline.n must be >= 1");
  if (magnitude < 0 || magnitude > 30) throw ValidationError("BAD_CONFIG", "baseline.magnitude must be in 0..30");
  if (chains < 1) throw ValidationError("BAD_CONFIG", "baseline.chains must be >= 1");
  if (max_depth < 1) throw ValidationError("BAD_CONFIG", "baseline.max_depth must be >= 1");
  if (!(alpha > 0.0)) throw ValidationError("BAD_CONFIG", "baseline.alpha must be > 0");
}

namespace {

AugOpInstance always(AugOpInstance op) {
  op.apply_probability = 1.0;
  return op;
}

}  // namespace

ImageBuffer trivial_augment(const ImageBuffer& img, const Catalog& catalog, SampleRng& rng,
                            KernelCounters* counters) {
  const auto kind = static_cast<AugKind>(rng.uniform_int(kAugKindCount));
  const double m = rng.uniform();
  return apply_op(img, always(magnitude_to_params(kind, m, catalog)), rng, counters);
}

ImageBuffer rand_augment(const ImageBuffer& img, const Catalog& catalog, int n, int magnitude, SampleRng& rng,
                         KernelCounters* counters) {
  const double m = magnitude / 30.0;
  ImageBuffer out = img;
  for (int i = 0; i < n; ++i) {
    const auto kind = static_cast<AugKind>(rng.uniform_int(kAugKindCount));
    out = apply_op(out, always(magnitude_to_params(kind, m, catalog)), rng, counters);
  }
  return out;
}

std::vector<AugKind> augmix_pool() {
  std::vector<AugKind> pool;
  for (AugKind k : all_aug_kinds()) {
    if (k != AugKind::erasing) pool.push_back(k);
  }
  return pool;
}

AugMixDraw draw_augmix(std::span<const AugKind> pool, const BaselineConfig& cfg, SampleRng& rng,
                       const Catalog& catalog) {
  AugMixDraw draw;
  draw.weights = rng.dirichlet(cfg.alpha, static_cast<std::size_t>(cfg.chains));
  draw.skip = rng.beta(cfg.alpha, cfg.alpha);
  for (int c = 0; c < cfg.chains; ++c) {
    const auto depth = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.max_depth)));
    std::vector<AugOpInstance> chain;
    for (int d = 0; d < depth; ++d) {
      const AugKind kind = pool[rng.uniform_int(pool.size())];
      chain.push_back(always(magnitude_to_params(kind, rng.uniform(), catalog)));
    }
    draw.chains.push_back(std::move(chain));
  }
  return draw;
}

ImageBuffer apply_augmix(const ImageBuffer& img, const AugMixDraw& draw, SampleRng& rng, KernelCounters* counters) {
  std::vector<double> mix(img.size(), 0.0);
  for (std::size_t c = 0; c < draw.chains.size(); ++c) {
    ImageBuffer branch = img;
    for (const auto& op : draw.chains[c]) branch = apply_op(branch, op, rng, counters);
    const auto px = branch.data();
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] += draw.weights[c] * px[i];
  }
  ImageBuffer out = img;
  auto dst = out.data();
  for (std::size_t i = 0; i < mix.size(); ++i) {
    dst[i] = static_cast<float>(draw.skip * dst[i] + (1.0 - draw.skip) * mix[i]);
  }
  out.clamp();
  return out;
}

ImageBuffer augmix(const ImageBuffer& img, const Catalog& catalog, const BaselineConfig& cfg, SampleRng& rng,
                   KernelCounters* counters) {
  static const auto pool = augmix_pool();
  const auto draw = draw_augmix(pool, cfg, rng, catalog);
  return apply_augmix(img, draw, rng, counters);
}

ImageBuffer apply_baseline(const ImageBuffer& img, const BaselineConfig& cfg, const StreamKey& key,
                           KernelCounters* counters) {
  const auto& catalog = Catalog::standard();
  SampleRng rng(key);
  switch (cfg.strategy) {
    case BaselineStrategy::none: return img;
    case BaselineStrategy::trivial: return trivial_augment(img, catalog, rng, counters);
    case BaselineStrategy::randaugment: return rand_augment(img, catalog, cfg.n, cfg.magnitude, rng, counters);
    case BaselineStrategy::augmix: return augmix(img, catalog, cfg, rng, counters);
  }
  return img;
}

}  // namespace augloop
