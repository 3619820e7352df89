// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "augloop/transforms.hpp"

namespace augloop {

enum class BaselineStrategy { none, trivial, randaugment, augmix };

std::string_view to_string(BaselineStrategy s);
BaselineStrategy baseline_strategy_from_string(std::string_view name);

struct BaselineConfig {
  BaselineStrategy strategy = BaselineStrategy::none;
  int n = 2;          // randaugment
  int magnitude = 9;  // randaugment, 0..30
  int chains = 3;     // augmix
  int max_depth = 3;  // augmix
  double alpha = 1.0; // augmix Dirichlet/Beta concentration

  /// Throws ValidationError when an invariant is broken.
  void validate() const;
};

/// One uniformly chosen kind at m ~ U[0,1], always applied.
ImageBuffer trivial_augment(const ImageBuffer& img, const Catalog& catalog, SampleRng& rng,
                            KernelCounters* counters = nullptr);

/// n kinds drawn with replacement, each at m = magnitude / 30, always applied.
ImageBuffer rand_augment(const ImageBuffer& img, const Catalog& catalog, int n, int magnitude, SampleRng& rng,
                         KernelCounters* counters = nullptr);

/// Random quantities of one AugMix application, separated from the mixing
/// so tests can pin them.
struct AugMixDraw {
  std::vector<double> weights;                   // Dirichlet(alpha), one per chain
  double skip = 0.0;                             // Beta(alpha, alpha)
  std::vector<std::vector<AugOpInstance>> chains;
};

/// Kinds AugMix chains draw from: the catalog minus erasing.
std::vector<AugKind> augmix_pool();

AugMixDraw draw_augmix(std::span<const AugKind> pool, const BaselineConfig& cfg, SampleRng& rng,
                       const Catalog& catalog = Catalog::standard());

/// skip * img + (1 - skip) * sum_i w_i * chain_i(img), clamped.
ImageBuffer apply_augmix(const ImageBuffer& img, const AugMixDraw& draw, SampleRng& rng,
                         KernelCounters* counters = nullptr);

ImageBuffer augmix(const ImageBuffer& img, const Catalog& catalog, const BaselineConfig& cfg, SampleRng& rng,
                   KernelCounters* counters = nullptr);

/// Strategy dispatch for one sample; none returns the input untouched.
ImageBuffer apply_baseline(const ImageBuffer& img, const BaselineConfig& cfg, const StreamKey& key,
                           KernelCounters* counters = nullptr);

}  // namespace augloop
