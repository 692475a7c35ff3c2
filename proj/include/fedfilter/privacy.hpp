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

#ifndef FEDFILTER_PRIVACY_HPP_
#define FEDFILTER_PRIVACY_HPP_

#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fedfilter/rng.hpp"

namespace fedfilter {

struct GradientNoiseConfig {
  double clip_threshold = 1.0;   // L2 bound on the shared update
  double noise_multiplier = 0.0; // Gaussian scale, std dev per coordinate is
                                 // noise_multiplier * clip_threshold
};

// L2-clips the update to clip_threshold, then adds zero-mean Gaussian noise
// with per-coordinate standard deviation noise_multiplier * clip_threshold.
inline std::vector<double> clip_and_noise(std::span<const double> delta,
                                          const GradientNoiseConfig& cfg,
                                          Rng& rng) {
  if (delta.empty()) {
    throw std::invalid_argument("clip_and_noise: empty update");
  }
  if (!(cfg.clip_threshold > 0.0) || !(cfg.noise_multiplier >= 0.0)) {
    throw std::invalid_argument("clip_and_noise: invalid config");
  }
  double norm_sq = 0.0;
  for (double v : delta) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("clip_and_noise: non-finite update");
    }
    norm_sq += v * v;
  }
  const double norm = std::sqrt(norm_sq);
  const double scale =
      norm > cfg.clip_threshold ? cfg.clip_threshold / norm : 1.0;
  std::vector<double> out(delta.begin(), delta.end());
  for (auto& v : out) v *= scale;
  if (cfg.noise_multiplier > 0.0) {
    const double sd = cfg.noise_multiplier * cfg.clip_threshold;
    for (auto& v : out) v += sd * rng.normal();
  }
  return out;
}

// Worst-case privacy cost of the permanent randomized response with flip
// mass p: epsilon = 2 ln((1 - p/2) / (p/2)). p = 0 means no obfuscation and
// maps to +infinity.
inline double epsilon_from_p(double p) {
  if (p < 0.0 || p > 1.0) {
    throw std::invalid_argument("epsilon_from_p: p must be in [0,1]");
  }
  if (p == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * std::log((1.0 - 0.5 * p) / (0.5 * p));
}

// Inverse of epsilon_from_p: p = 2 / (1 + e^{epsilon/2}).
inline double p_from_epsilon(double epsilon) {
  if (!(epsilon >= 0.0)) {
    throw std::invalid_argument("p_from_epsilon: epsilon must be >= 0");
  }
  return 2.0 / (1.0 + std::exp(0.5 * epsilon));
}

// Per-tester state of the permanent randomized response. Released values are
// memorized per (contributor, true sign) and reused for all future reports.
struct VotePrivacy {
  double p = 0.0;
  std::map<std::pair<int, int>, int> memo;
};

// Releases +1 with probability p/2, -1 with probability p/2, and the true
// sign v with probability 1 - p, so P[output = v] = 1 - p/2. The first
// released value for a (contributor, v) pair is memorized; repeat calls
// return it without consuming randomness.
inline int randomized_response(int v, VotePrivacy& priv, int contributor_id,
                               Rng& rng) {
  if (v != 1 && v != -1) {
    throw std::invalid_argument("randomized_response: sign must be +1 or -1");
  }
  if (priv.p < 0.0 || priv.p > 1.0) {
    throw std::invalid_argument("randomized_response: p must be in [0,1]");
  }
  const auto key = std::make_pair(contributor_id, v);
  if (auto it = priv.memo.find(key); it != priv.memo.end()) {
    return it->second;
  }
  const double u = rng.uniform();
  int released = v;
  if (u < 0.5 * priv.p) {
    released = 1;
  } else if (u < priv.p) {
    released = -1;
  }
  priv.memo.emplace(key, released);
  return released;
}

}  // namespace fedfilter

#endif  // FEDFILTER_PRIVACY_HPP_
