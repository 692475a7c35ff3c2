// Copyright 2026 The fedfilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDFILTER_RNG_HPP_
#define FEDFILTER_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace fedfilter {

// SplitMix64 finalizer. Used both for seed whitening and for deriving
// independent substreams from (seed, path...) tuples.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a substream seed from a base seed and a path of identifiers
// (participant id, role tag, round index, ...). Order-sensitive.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(base);
  for (std::uint64_t x : path) {
    s = mix64(s ^ mix64(x));
  }
  return s;
}

// Role tags for substream derivation.
namespace substream {
inline constexpr std::uint64_t kSynthesis = 1;
inline constexpr std::uint64_t kWarmupSplit = 2;
inline constexpr std::uint64_t kPartition = 3;
inline constexpr std::uint64_t kCorruption = 4;
inline constexpr std::uint64_t kWarmupTrain = 5;
inline constexpr std::uint64_t kContributor = 6;
inline constexpr std::uint64_t kTester = 7;
inline constexpr std::uint64_t kFinalUpdate = 8;
}  // namespace substream

// Seeded random stream. The engine is std::mt19937_64 (bit-exact across
// platforms by the standard); all samplers are implemented here so that the
// produced values are reproducible independent of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform double in (0, 1), safe as a log() argument.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
    const std::uint64_t bound =
        (std::numeric_limits<std::uint64_t>::max() / n) * n;
    std::uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return static_cast<std::size_t>(x % n);
  }

  // Standard normal via Box-Muller. Consumes exactly two draws.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Gamma(alpha, 1) via Marsaglia-Tsang, with the usual boost for alpha < 1.
  double gamma(double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("gamma: alpha must be > 0");
    if (alpha < 1.0) {
      const double u = uniform_open();
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Symmetric Dirichlet(alpha) over k categories.
  std::vector<double> dirichlet(double alpha, int k) {
    if (k < 1) throw std::invalid_argument("dirichlet: k must be >= 1");
    std::vector<double> q(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (auto& qi : q) {
      qi = gamma(alpha);
      sum += qi;
    }
    if (sum <= 0.0) {
      // All gammas underflowed (tiny alpha). Limit behaviour: a single
      // category carries everything.
      std::fill(q.begin(), q.end(), 0.0);
      q[uniform_index(q.size())] = 1.0;
      return q;
    }
    for (auto& qi : q) qi /= sum;
    return q;
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedfilter

#endif  // FEDFILTER_RNG_HPP_
