// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace augloop {

/// SplitMix64 output function; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed from (parent, integer label). Pure and order-sensitive.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) {
  return mix64(parent ^ mix64(label + 0x9e3779b97f4a7c15ULL));
}

/// Child seed from (parent, text label), e.g. derive_seed(run_seed, "trainer").
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

/// Coordinates of one augmentation draw.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t sample = 0;
  std::uint64_t op_position = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

/// Counter-based stream: the n-th output is mix64(key + n * gamma), so the
/// whole stream is a pure function of the key it was built from.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t key) : key_(key) {}
  explicit SampleRng(const StreamKey& k);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double gamma(double shape);
  double beta(double a, double b);
  std::vector<double> dirichlet(double alpha, std::size_t k);

  /// Independent child stream; does not advance this one.
  SampleRng split(std::uint64_t label) const { return SampleRng(derive_seed(key_, label)); }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace augloop
