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

#ifndef FEDFILTER_INFLUENCE_HPP_
#define FEDFILTER_INFLUENCE_HPP_

#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fedfilter/model.hpp"

namespace fedfilter {

struct Vote {
  int contributor_id = 0;
  int tester_id = 0;
  int true_sign = 0;
  int released_sign = 0;
};

// Sign of the summed test-loss change between the broadcast model and a
// contributor's update. A neutral update (sum exactly zero) counts as +1.
inline int lazy_sign(std::span<const LabeledExample> test_set,
                     const ModelState& base, const ModelState& updated) {
  if (test_set.empty()) {
    throw std::invalid_argument("lazy_sign: empty test set");
  }
  if (base.arch != updated.arch) {
    throw std::invalid_argument("lazy_sign: mismatched architectures");
  }
  double s = 0.0;
  for (const auto& z : test_set) {
    s += loss(base, z) - loss(updated, z);
  }
  return s >= 0.0 ? 1 : -1;
}

struct OracleConfig {
  double learning_rate = 0.5;
  int max_epochs = 10000;
  double grad_tol = 1e-6;
};

struct InfluenceOracleResult {
  double value = 0.0;
  int sign = 1;  // +1 iff value >= 0
  bool converged = false;
};

// Exact influence of a candidate batch: the drop in held-out risk between a
// model fully trained on train_set and one fully trained on
// train_set + candidate_batch. Positive means the batch helps. Requires the
// convex reference model; "full training" is descent to grad_tol or
// max_epochs, whichever comes first.
inline InfluenceOracleResult exact_influence(
    std::span<const LabeledExample> train_set,
    std::span<const LabeledExample> candidate_batch,
    std::span<const LabeledExample> eval_set, const ModelState& model_template,
    const OracleConfig& cfg = {}) {
  if (train_set.empty() || candidate_batch.empty() || eval_set.empty()) {
    throw std::invalid_argument("exact_influence: empty input set");
  }
  const FitResult base = fit_until(model_template, train_set,
                                   cfg.learning_rate, cfg.max_epochs,
                                   cfg.grad_tol);

  std::vector<LabeledExample> augmented(train_set.begin(), train_set.end());
  augmented.insert(augmented.end(), candidate_batch.begin(),
                   candidate_batch.end());
  const FitResult with_batch = fit_until(model_template, augmented,
                                         cfg.learning_rate, cfg.max_epochs,
                                         cfg.grad_tol);

  InfluenceOracleResult res;
  res.value =
      empirical_risk(base.model, eval_set) -
      empirical_risk(with_batch.model, eval_set);
  res.sign = res.value >= 0.0 ? 1 : -1;
  res.converged = base.converged && with_batch.converged;
  return res;
}

// Fraction of (lazy sign, oracle sign) pairs that agree.
inline double sign_agreement(std::span<const std::pair<int, int>> trials) {
  if (trials.empty()) {
    throw std::invalid_argument("sign_agreement: no trials");
  }
  std::size_t matches = 0;
  for (const auto& [lazy, oracle] : trials) {
    if (lazy == oracle) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(trials.size());
}

}  // namespace fedfilter

#endif  // FEDFILTER_INFLUENCE_HPP_
