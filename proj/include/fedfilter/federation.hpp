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

#ifndef FEDFILTER_FEDERATION_HPP_
#define FEDFILTER_FEDERATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedfilter/data.hpp"
#include "fedfilter/influence.hpp"
#include "fedfilter/model.hpp"
#include "fedfilter/privacy.hpp"
#include "fedfilter/rng.hpp"

namespace fedfilter {

using VoteRecord = Vote;

struct FederationConfig {
  int participant_count = 100;
  int rounds = 1;
  TrainConfig train_cfg{3, 0.1, true};
  GradientNoiseConfig noise_cfg{1.0, 0.02};
  double epsilon_target = 1.0;
  std::uint64_t master_seed = 1;
  PartitionConfig partition;
  CorruptionConfig corruption;
  // Warm-up and final-update training runs to convergence under these caps.
  double center_learning_rate = 0.5;
  int center_max_epochs = 2000;
  double center_grad_tol = 1e-6;
};

struct ThresholdResult {
  double value = 0.0;
  bool degenerate = false;  // all vote sums equal
};

struct RoundOutcome {
  std::map<int, int> vote_sums;
  double threshold = 0.0;
  bool degenerate_threshold = false;
  std::set<int> accepted;
  std::set<int> rejected;
  std::vector<VoteRecord> votes;
  ModelState model_after;
  bool all_rejected = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline void check_federation_config(const FederationConfig& cfg) {
  if (cfg.participant_count < 2) {
    throw std::invalid_argument("federation: need >= 2 participants");
  }
  if (cfg.rounds < 1) {
    throw std::invalid_argument("federation: rounds must be >= 1");
  }
  check_train_config(cfg.train_cfg);
  if (!(cfg.epsilon_target >= 0.0)) {
    throw std::invalid_argument("federation: epsilon_target must be >= 0");
  }
}

}  // namespace detail

// Trains the initial model to convergence on the warm-up data. A missing
// class is reported through `warnings` but training proceeds.
inline ModelState warmup_model(const Dataset& warmup, double learning_rate,
                               int max_epochs, double grad_tol,
                               std::vector<std::string>* warnings = nullptr) {
  detail::check_dataset(warmup);
  std::vector<int> present(static_cast<std::size_t>(warmup.class_count), 0);
  int dim = static_cast<int>(warmup.examples.front().features.size());
  for (const auto& z : warmup.examples) {
    present[static_cast<std::size_t>(z.label)] = 1;
  }
  for (int c = 0; c < warmup.class_count; ++c) {
    if (!present[static_cast<std::size_t>(c)] && warnings) {
      warnings->push_back("warm-up data has no examples of class " +
                          std::to_string(c));
    }
  }
  const ModelState init = make_linear_model(dim, warmup.class_count);
  return fit_until(init, warmup.examples, learning_rate, max_epochs, grad_tol)
      .model;
}

// Contributor step: k local epochs with frozen body, share the clipped and
// noised head delta. The payload length is exactly the head size.
inline std::vector<double> contributor_update(
    const ParticipantRecord& participant, const ModelState& base,
    const TrainConfig& train_cfg, const GradientNoiseConfig& noise_cfg,
    Rng& rng) {
  if (participant.train_batch.empty()) {
    throw std::invalid_argument("contributor_update: empty train batch");
  }
  TrainConfig cfg = train_cfg;
  cfg.freeze_body = true;
  ModelState updated;
  try {
    updated = train(base, participant.train_batch, cfg, rng);
  } catch (const NumericError& e) {
    throw NumericError("contributor " + std::to_string(participant.id) + ": " +
                       e.what());
  }
  const std::vector<double> delta = head_delta(base, updated);
  return clip_and_noise(delta, noise_cfg, rng);
}

// Tester step: rebuild the contributor's model from the broadcast payload,
// vote on the sign of the lazy influence, obfuscate the vote.
inline VoteRecord tester_vote(const ParticipantRecord& tester,
                              VotePrivacy& priv, const ModelState& base,
                              std::span<const double> payload,
                              int contributor_id, Rng& rng) {
  if (tester.id == contributor_id) {
    throw std::invalid_argument("tester_vote: no self-votes");
  }
  const ModelState updated = apply_head_delta(base, payload);
  const int true_sign = lazy_sign(tester.test_set, base, updated);
  const int released = randomized_response(true_sign, priv, contributor_id, rng);
  return {contributor_id, tester.id, true_sign, released};
}

// 1-D 2-means over the vote sums: centers start at (min, max), Lloyd
// iterations run to a fixpoint, and the midpoint of the final centers is the
// filtration threshold. All-equal input is degenerate and returns the value.
inline ThresholdResult kmeans_threshold(const std::vector<int>& vote_sums) {
  if (vote_sums.size() < 2) {
    throw std::invalid_argument("kmeans_threshold: need >= 2 vote sums");
  }
  const auto [lo_it, hi_it] =
      std::minmax_element(vote_sums.begin(), vote_sums.end());
  double c1 = static_cast<double>(*lo_it);
  double c2 = static_cast<double>(*hi_it);
  if (c1 == c2) return {c1, true};
  for (int iter = 0; iter < 100; ++iter) {
    double sum1 = 0.0, sum2 = 0.0;
    int n1 = 0, n2 = 0;
    for (int s : vote_sums) {
      const double x = static_cast<double>(s);
      if (std::abs(x - c1) <= std::abs(x - c2)) {
        sum1 += x;
        ++n1;
      } else {
        sum2 += x;
        ++n2;
      }
    }
    const double next1 = n1 > 0 ? sum1 / n1 : c1;
    const double next2 = n2 > 0 ? sum2 / n2 : c2;
    if (next1 == c1 && next2 == c2) break;
    c1 = next1;
    c2 = next2;
  }
  return {0.5 * (c1 + c2), false};
}

// Applies the strict-below-threshold rejection rule and retrains the model
// on the pooled accepted batches. With everything rejected the model is
// returned unchanged and the outcome is flagged.
inline RoundOutcome filter_and_update(const ModelState& base,
                                      const std::vector<ParticipantRecord>& participants,
                                      RoundOutcome outcome,
                                      const FederationConfig& cfg) {
  for (const auto& p : participants) {
    if (!outcome.vote_sums.count(p.id)) {
      throw std::invalid_argument("filter_and_update: missing votes for " +
                                  std::to_string(p.id));
    }
    if (outcome.vote_sums.at(p.id) < outcome.threshold) {
      outcome.rejected.insert(p.id);
    } else {
      outcome.accepted.insert(p.id);
    }
  }
  if (outcome.accepted.empty()) {
    outcome.all_rejected = true;
    outcome.model_after = base;
    outcome.warnings.push_back("all participants rejected; model unchanged");
    return outcome;
  }
  std::vector<LabeledExample> pooled;
  for (const auto& p : participants) {
    if (outcome.accepted.count(p.id)) {
      pooled.insert(pooled.end(), p.train_batch.begin(), p.train_batch.end());
    }
  }
  outcome.model_after = fit_until(base, pooled, cfg.center_learning_rate,
                                  cfg.center_max_epochs, cfg.center_grad_tol)
                            .model;
  return outcome;
}

// Result of a full run: the last round's outcome plus the participants
// (with ground-truth corruption flags) for metric computation, and the
// warm-up model the round started from.
struct RoundRun {
  RoundOutcome outcome;
  std::vector<ParticipantRecord> participants;
  ModelState initial_model;
};

// Full evaluation run (cfg.rounds rounds, carrying the model and the
// testers' response memos forward): warm-up, partition, corruption, then per
// round contributor updates, tester votes, 2-means threshold, filtering and
// the final update. Deterministic in (cfg, dataset, master_seed);
// substreams are derived per (role, ids, round).
inline RoundRun run_round_with_participants(const FederationConfig& cfg,
                                            const Dataset& dataset) {
  detail::check_federation_config(cfg);
  PartitionConfig part_cfg = cfg.partition;
  part_cfg.participant_count = cfg.participant_count;

  std::vector<std::string> warnings;
  auto [warmup, pool] = split_warmup(dataset, part_cfg, cfg.master_seed);
  ModelState model =
      warmup_model(warmup, cfg.center_learning_rate, cfg.center_max_epochs,
                   cfg.center_grad_tol, &warnings);

  PartitionResult part = dirichlet_partition(pool, part_cfg, cfg.master_seed);
  std::vector<ParticipantRecord> participants =
      corrupt(std::move(part.participants), cfg.corruption,
              dataset.class_count, cfg.master_seed);

  const double p = p_from_epsilon(cfg.epsilon_target);
  std::vector<VotePrivacy> privacy(participants.size());
  for (auto& pr : participants) pr.privacy_p = p;
  for (auto& vp : privacy) vp.p = p;

  const int n = cfg.participant_count;
  RoundRun run;
  run.initial_model = model;
  for (int round = 0; round < cfg.rounds; ++round) {
    RoundOutcome outcome;
    outcome.warnings = warnings;
    for (int i = 0; i < n; ++i) {
      Rng crng(derive_seed(cfg.master_seed,
                           {substream::kContributor,
                            static_cast<std::uint64_t>(i),
                            static_cast<std::uint64_t>(round)}));
      const std::vector<double> payload = contributor_update(
          participants[static_cast<std::size_t>(i)], model, cfg.train_cfg,
          cfg.noise_cfg, crng);
      int sum = 0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        Rng trng(derive_seed(cfg.master_seed,
                             {substream::kTester,
                              static_cast<std::uint64_t>(j),
                              static_cast<std::uint64_t>(i),
                              static_cast<std::uint64_t>(round)}));
        const VoteRecord vote =
            tester_vote(participants[static_cast<std::size_t>(j)],
                        privacy[static_cast<std::size_t>(j)], model, payload,
                        i, trng);
        sum += vote.released_sign;
        outcome.votes.push_back(vote);
      }
      outcome.vote_sums[i] = sum;
    }
    std::vector<int> sums;
    sums.reserve(outcome.vote_sums.size());
    for (const auto& [id, s] : outcome.vote_sums) sums.push_back(s);
    const ThresholdResult thr = kmeans_threshold(sums);
    outcome.threshold = thr.value;
    outcome.degenerate_threshold = thr.degenerate;
    outcome = filter_and_update(model, participants, std::move(outcome), cfg);
    model = outcome.model_after;
    run.outcome = std::move(outcome);
  }
  run.participants = std::move(participants);
  return run;
}

inline RoundOutcome run_round(const FederationConfig& cfg,
                              const Dataset& dataset) {
  return run_round_with_participants(cfg, dataset).outcome;
}

inline nlohmann::json outcome_to_json(const RoundOutcome& outcome) {
  nlohmann::json j;
  nlohmann::json sums = nlohmann::json::object();
  for (const auto& [id, s] : outcome.vote_sums) {
    sums[std::to_string(id)] = s;
  }
  j["vote_sums"] = std::move(sums);
  j["threshold"] = outcome.threshold;
  j["degenerate_threshold"] = outcome.degenerate_threshold;
  j["accepted"] = std::vector<int>(outcome.accepted.begin(), outcome.accepted.end());
  j["rejected"] = std::vector<int>(outcome.rejected.begin(), outcome.rejected.end());
  j["all_rejected"] = outcome.all_rejected;
  j["warnings"] = outcome.warnings;
  return j;
}

inline void write_votes_csv(const std::vector<VoteRecord>& votes,
                            std::ostream& out) {
  out << "contributor_id,tester_id,true_sign,released_sign\n";
  for (const auto& v : votes) {
    out << v.contributor_id << ',' << v.tester_id << ',' << v.true_sign << ','
        << v.released_sign << '\n';
  }
}

}  // namespace fedfilter

#endif  // FEDFILTER_FEDERATION_HPP_
