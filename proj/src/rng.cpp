// SPDX-License-Identifier: Apache-2.0
#include "augloop/rng.hpp"

#include <cmath>
#include <numbers>

namespace augloop {

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
  // FNV-1a over the label, then the integer derivation.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(parent, h);
}

SampleRng::SampleRng(const StreamKey& k)
    : key_(derive_seed(derive_seed(derive_seed(mix64(k.seed), k.epoch), k.sample), k.op_position)) {}

std::uint64_t SampleRng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double SampleRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t SampleRng::uniform_int(std::uint64_t n) {
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double SampleRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double SampleRng::gamma(double shape) {
  // Marsaglia & Tsang; shape < 1 uses the u^(1/shape) boost.
  if (shape < 1.0) {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double SampleRng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  if (x + y <= 0.0) return 0.5;
  return x / (x + y);
}

std::vector<double> SampleRng::dirichlet(double alpha, std::size_t k) {
  std::vector<double> w(k);
  double sum = 0.0;
  for (auto& v : w) {
    v = gamma(alpha);
    sum += v;
  }
  if (sum <= 0.0) {
    for (auto& v : w) v = 1.0 / static_cast<double>(k);
    return w;
  }
  for (auto& v : w) v /= sum;
  return w;
}

}  // namespace augloop
