// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hopformer/common.hpp"

namespace hopformer {

/// Counter-based splittable generator. A stream is (key, counter); output i is
/// a splitmix64-style finalizer of key + i * golden. Streams are value types:
/// copying one replays the same sequence, split() derives an independent
/// stream. Every stochastic op in the codebase takes an explicit stream, which
/// is what makes runs bit-reproducible for a fixed seed.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed) : key_(finalize(seed ^ 0x6a09e667f3bcc909ull)) {}

  /// Derives a statistically independent stream; (key, tag) -> new key.
  RngStream split(std::uint64_t tag) const {
    RngStream s;
    s.key_ = finalize(key_ ^ finalize(tag + 0x9e3779b97f4a7c15ull));
    return s;
  }

  std::uint64_t next_u64() {
    std::uint64_t v = key_ + counter_ * 0x9e3779b97f4a7c15ull;
    ++counter_;
    return finalize(v);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n) {
    if (n == 0) throw ValidationError("RngStream::below: n must be positive");
    const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    std::uint64_t v = next_u64();
    while (v > bound) v = next_u64();
    return static_cast<std::size_t>(v % n);
  }

  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze.
  double gamma(double shape) {
    if (shape <= 0.0) throw ValidationError("gamma shape must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u > 0.0 ? u : 0x1.0p-53, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    const double s = x + y;
    return s > 0.0 ? x / s : 0.5;
  }

  /// Fisher-Yates permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(p[i - 1], p[below(i)]);
    }
    return p;
  }

 private:
  static std::uint64_t finalize(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace hopformer
