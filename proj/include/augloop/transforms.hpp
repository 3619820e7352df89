// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <atomic>
#include <cstdint>

#include "augloop/image.hpp"
#include "augloop/policy.hpp"
#include "augloop/rng.hpp"

namespace augloop {

/// Instrumentation shared by kernels; safe to update from worker threads.
struct KernelCounters {
  std::array<std::atomic<std::uint64_t>, kAugKindCount> invoked{};
  std::atomic<std::uint64_t> skipped{0};   // gated out by apply_probability
  std::atomic<std::uint64_t> warnings{0};  // e.g. hue on a 1-channel image

  std::uint64_t total_invoked() const;
  std::uint64_t invoked_of(AugKind kind) const { return invoked[static_cast<std::size_t>(kind)].load(); }
  void reset();
};

/// One policy step. Draws the Bernoulli(p) gate first; a skipped op returns
/// the input unchanged. Throws ValidationError for an op the catalog rejects.
ImageBuffer apply_op(const ImageBuffer& img, const AugOpInstance& op, SampleRng& rng,
                     KernelCounters* counters = nullptr);

/// Left fold of apply_op; op i draws from SampleRng({seed, epoch, sample, i}).
ImageBuffer apply_policy(const ImageBuffer& img, const Policy& policy, const StreamKey& key,
                         KernelCounters* counters = nullptr);

/// Bilinear sample at fractional (y, x), coordinates clamped to the edge.
float sample_bilinear(const ImageBuffer& img, double y, double x, int c);

}  // namespace augloop
