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

#ifndef FEDFILTER_DATA_HPP_
#define FEDFILTER_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedfilter/model.hpp"
#include "fedfilter/rng.hpp"

namespace fedfilter {

struct Dataset {
  std::vector<LabeledExample> examples;
  int class_count = 0;
  std::string name;

  std::size_t size() const { return examples.size(); }
};

struct PartitionConfig {
  int participant_count = 100;
  int train_batch_size = 100;
  int test_set_size = 50;
  // nullopt selects IID sampling; a positive value selects symmetric
  // Dirichlet mixtures per participant.
  std::optional<double> dirichlet_alpha;
  double warmup_fraction = 0.01;
};

struct CorruptionConfig {
  double corrupt_participant_fraction = 0.3;
  double corrupt_point_fraction = 0.9;
};

// One participant's private data. is_corrupted is ground truth for metric
// computation only; protocol code never reads it.
struct ParticipantRecord {
  int id = 0;
  std::vector<LabeledExample> train_batch;
  std::vector<LabeledExample> test_set;
  bool is_corrupted = false;
  double privacy_p = 0.0;
};

struct PartitionReport {
  // Realized class counts per participant, train and test pooled.
  std::vector<std::vector<int>> class_counts;
  // Number of points that had to be drawn from a class other than the one
  // the participant's mixture requested, due to pool exhaustion.
  int fallback_draws = 0;
};

struct PartitionResult {
  std::vector<ParticipantRecord> participants;
  PartitionReport report;
};

namespace detail {

inline void check_dataset(const Dataset& data) {
  if (data.examples.empty() || data.class_count < 1) {
    throw std::invalid_argument("dataset: empty or missing class count");
  }
  for (const auto& z : data.examples) {
    if (z.label < 0 || z.label >= data.class_count) {
      throw std::invalid_argument("dataset: label out of range");
    }
  }
}

// Largest-remainder apportionment of `total` into integer counts
// proportional to non-negative weights. Ties broken toward lower index.
inline std::vector<int> apportion(const std::vector<double>& weights,
                                  int total) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(weights.size(), 0);
  if (wsum <= 0.0 || total <= 0) return counts;
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(total) * weights[i] / wsum;
    counts[i] = static_cast<int>(std::floor(quota));
    assigned += counts[i];
    remainders.emplace_back(quota - std::floor(quota), i);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int k = 0; k < total - assigned; ++k) {
    counts[remainders[static_cast<std::size_t>(k)].second] += 1;
  }
  return counts;
}

}  // namespace detail

// Gaussian class clusters. For class_count <= dim, class means sit on scaled
// basis vectors so that every pair of means is exactly `separation` apart;
// otherwise means are random directions with the same expected spacing. The
// means depend only on (class_count, dim, separation), so datasets built
// from different seeds sample the same task.
inline Dataset make_synthetic(int class_count, int dim, int per_class,
                              double separation, std::uint64_t seed) {
  if (class_count < 2 || dim < 1 || per_class < 1 || !(separation > 0.0)) {
    throw std::invalid_argument("make_synthetic: invalid sizes");
  }
  Rng rng(derive_seed(seed, {substream::kSynthesis}));
  const double radius = separation / std::sqrt(2.0);
  std::vector<std::vector<double>> means(
      static_cast<std::size_t>(class_count),
      std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  if (class_count <= dim) {
    for (int c = 0; c < class_count; ++c) {
      means[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)] = radius;
    }
  } else {
    Rng mean_rng(derive_seed(0x6d65616eULL,
                             {static_cast<std::uint64_t>(class_count),
                              static_cast<std::uint64_t>(dim)}));
    for (auto& m : means) {
      double norm_sq = 0.0;
      for (auto& v : m) {
        v = mean_rng.normal();
        norm_sq += v * v;
      }
      const double scale = radius / std::max(std::sqrt(norm_sq), 1e-12);
      for (auto& v : m) v *= scale;
    }
  }
  Dataset data;
  data.class_count = class_count;
  data.name = "synthetic-c" + std::to_string(class_count) + "-d" +
              std::to_string(dim);
  data.examples.reserve(static_cast<std::size_t>(class_count) * per_class);
  for (int c = 0; c < class_count; ++c) {
    for (int i = 0; i < per_class; ++i) {
      LabeledExample z;
      z.label = c;
      z.features.resize(static_cast<std::size_t>(dim));
      for (int j = 0; j < dim; ++j) {
        z.features[static_cast<std::size_t>(j)] =
            means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
            rng.normal();
      }
      data.examples.push_back(std::move(z));
    }
  }
  return data;
}

// CSV rows are `label,f0,f1,...`.
inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_csv: cannot open " + path);
  Dataset data;
  data.name = path;
  std::size_t dim = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LabeledExample z;
    std::stringstream ss(line);
    std::string field;
    if (!std::getline(ss, field, ',')) continue;
    z.label = std::stoi(field);
    while (std::getline(ss, field, ',')) {
      z.features.push_back(std::stod(field));
    }
    if (dim == 0) dim = z.features.size();
    if (z.features.size() != dim) {
      throw std::invalid_argument("load_csv: inconsistent feature dimension");
    }
    if (z.label < 0) throw std::invalid_argument("load_csv: negative label");
    data.class_count = std::max(data.class_count, z.label + 1);
    data.examples.push_back(std::move(z));
  }
  if (data.examples.empty()) {
    throw std::invalid_argument("load_csv: no rows in " + path);
  }
  return data;
}

inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("save_csv: cannot open " + path);
  char buf[64];
  for (const auto& z : data.examples) {
    out << z.label;
    for (double f : z.features) {
      std::snprintf(buf, sizeof(buf), "%.17g", f);
      out << ',' << buf;
    }
    out << '\n';
  }
}

// Class-stratified warm-up split. |warmup| = round(fraction * |data|), with
// per-class counts apportioned by largest remainder.
inline std::pair<Dataset, Dataset> split_warmup(const Dataset& data,
                                                const PartitionConfig& cfg,
                                                std::uint64_t seed) {
  detail::check_dataset(data);
  if (!(cfg.warmup_fraction > 0.0) || !(cfg.warmup_fraction < 1.0)) {
    throw std::invalid_argument("split_warmup: warmup_fraction not in (0,1)");
  }
  const int total =
      static_cast<int>(std::llround(cfg.warmup_fraction *
                                    static_cast<double>(data.size())));
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(data.class_count));
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.examples[i].label)].push_back(i);
  }
  std::vector<double> class_sizes;
  class_sizes.reserve(by_class.size());
  for (const auto& idx : by_class) {
    class_sizes.push_back(static_cast<double>(idx.size()));
  }
  const std::vector<int> take = detail::apportion(class_sizes, total);

  Rng rng(derive_seed(seed, {substream::kWarmupSplit}));
  std::vector<bool> in_warmup(data.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    rng.shuffle(idx);
    const int k = std::min<int>(take[c], static_cast<int>(idx.size()));
    for (int i = 0; i < k; ++i) in_warmup[idx[static_cast<std::size_t>(i)]] = true;
  }

  Dataset warmup{{}, data.class_count, data.name + "-warmup"};
  Dataset pool{{}, data.class_count, data.name + "-pool"};
  for (std::size_t i = 0; i < data.size(); ++i) {
    (in_warmup[i] ? warmup : pool).examples.push_back(data.examples[i]);
  }

  const long need = static_cast<long>(cfg.participant_count) *
                    (cfg.train_batch_size + cfg.test_set_size);
  if (static_cast<long>(pool.size()) < need) {
    throw std::invalid_argument(
        "split_warmup: pool too small for the requested partition (" +
        std::to_string(pool.size()) + " < " + std::to_string(need) + ")");
  }
  return {std::move(warmup), std::move(pool)};
}

// Splits the pool into per-participant train/test sets. In Dirichlet mode
// each participant draws a class mixture from Dirichlet(alpha) and both its
// train batch and test set realize that mixture (apportioned counts, points
// sampled without replacement from per-class pools). IID mode deals a single
// global shuffle.
inline PartitionResult dirichlet_partition(const Dataset& pool,
                                           const PartitionConfig& cfg,
                                           std::uint64_t seed) {
  detail::check_dataset(pool);
  if (cfg.participant_count < 2) {
    throw std::invalid_argument("dirichlet_partition: need >= 2 participants");
  }
  if (cfg.train_batch_size < 1 || cfg.test_set_size < 1) {
    throw std::invalid_argument("dirichlet_partition: invalid set sizes");
  }
  if (cfg.dirichlet_alpha && !(*cfg.dirichlet_alpha > 0.0)) {
    throw std::invalid_argument("dirichlet_partition: alpha must be > 0");
  }
  const long need = static_cast<long>(cfg.participant_count) *
                    (cfg.train_batch_size + cfg.test_set_size);
  if (static_cast<long>(pool.size()) < need) {
    throw std::invalid_argument("dirichlet_partition: pool exhausted");
  }

  PartitionResult result;
  result.participants.resize(static_cast<std::size_t>(cfg.participant_count));
  result.report.class_counts.assign(
      static_cast<std::size_t>(cfg.participant_count),
      std::vector<int>(static_cast<std::size_t>(pool.class_count), 0));

  Rng pool_rng(derive_seed(seed, {substream::kPartition}));

  if (!cfg.dirichlet_alpha) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    pool_rng.shuffle(order);
    std::size_t next = 0;
    for (int i = 0; i < cfg.participant_count; ++i) {
      auto& p = result.participants[static_cast<std::size_t>(i)];
      p.id = i;
      for (int k = 0; k < cfg.train_batch_size; ++k) {
        const auto& z = pool.examples[order[next++]];
        p.train_batch.push_back(z);
        result.report.class_counts[static_cast<std::size_t>(i)]
                                  [static_cast<std::size_t>(z.label)]++;
      }
      for (int k = 0; k < cfg.test_set_size; ++k) {
        const auto& z = pool.examples[order[next++]];
        p.test_set.push_back(z);
        result.report.class_counts[static_cast<std::size_t>(i)]
                                  [static_cast<std::size_t>(z.label)]++;
      }
    }
    return result;
  }

  // Per-class pools, each shuffled once; draws pop from the back.
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(pool.class_count));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    by_class[static_cast<std::size_t>(pool.examples[i].label)].push_back(i);
  }
  for (auto& idx : by_class) pool_rng.shuffle(idx);

  auto stock = [&](std::size_t c) { return static_cast<int>(by_class[c].size()); };

  // Wanted counts capped by remaining stock; the deficit falls back to the
  // classes with the most stock left.
  auto resolve_counts = [&](const std::vector<double>& mixture, int m,
                            int& fallback) {
    std::vector<int> want = detail::apportion(mixture, m);
    int deficit = 0;
    for (std::size_t c = 0; c < want.size(); ++c) {
      if (want[c] > stock(c)) {
        deficit += want[c] - stock(c);
        want[c] = stock(c);
      }
    }
    while (deficit > 0) {
      std::size_t best = want.size();
      int best_room = 0;
      for (std::size_t c = 0; c < want.size(); ++c) {
        const int room = stock(c) - want[c];
        if (room > best_room) {
          best_room = room;
          best = c;
        }
      }
      if (best == want.size()) {
        throw std::invalid_argument("dirichlet_partition: pool exhausted");
      }
      want[best] += 1;
      --deficit;
      ++fallback;
    }
    return want;
  };

  for (int i = 0; i < cfg.participant_count; ++i) {
    auto& p = result.participants[static_cast<std::size_t>(i)];
    p.id = i;
    Rng prng(derive_seed(seed, {substream::kPartition,
                                static_cast<std::uint64_t>(i)}));
    const std::vector<double> mixture =
        prng.dirichlet(*cfg.dirichlet_alpha, pool.class_count);
    const std::vector<int> train_counts = resolve_counts(
        mixture, cfg.train_batch_size, result.report.fallback_draws);
    for (std::size_t c = 0; c < train_counts.size(); ++c) {
      for (int k = 0; k < train_counts[c]; ++k) {
        p.train_batch.push_back(pool.examples[by_class[c].back()]);
        by_class[c].pop_back();
      }
    }
    const std::vector<int> test_counts = resolve_counts(
        mixture, cfg.test_set_size, result.report.fallback_draws);
    for (std::size_t c = 0; c < test_counts.size(); ++c) {
      for (int k = 0; k < test_counts[c]; ++k) {
        p.test_set.push_back(pool.examples[by_class[c].back()]);
        by_class[c].pop_back();
      }
    }
    auto& counts = result.report.class_counts[static_cast<std::size_t>(i)];
    for (const auto& z : p.train_batch)
      counts[static_cast<std::size_t>(z.label)]++;
    for (const auto& z : p.test_set)
      counts[static_cast<std::size_t>(z.label)]++;
  }
  return result;
}

// Flags exactly round(fraction * N) participants and, within each, relabels
// exactly round(point_fraction * batch) train points with a uniformly random
// wrong label. Test sets are never touched.
inline std::vector<ParticipantRecord> corrupt(
    std::vector<ParticipantRecord> participants, const CorruptionConfig& cfg,
    int class_count, std::uint64_t seed) {
  if (cfg.corrupt_participant_fraction < 0.0 ||
      cfg.corrupt_participant_fraction > 1.0 ||
      cfg.corrupt_point_fraction < 0.0 || cfg.corrupt_point_fraction > 1.0) {
    throw std::invalid_argument("corrupt: fractions must be in [0,1]");
  }
  if (class_count < 2) {
    throw std::invalid_argument("corrupt: need at least 2 classes");
  }
  const int n = static_cast<int>(participants.size());
  const int flagged = static_cast<int>(
      std::llround(cfg.corrupt_participant_fraction * n));

  Rng rng(derive_seed(seed, {substream::kCorruption}));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  for (int k = 0; k < flagged; ++k) {
    auto& p = participants[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    p.is_corrupted = true;
    Rng prng(derive_seed(seed, {substream::kCorruption,
                                static_cast<std::uint64_t>(p.id)}));
    const int batch = static_cast<int>(p.train_batch.size());
    const int points =
        static_cast<int>(std::llround(cfg.corrupt_point_fraction * batch));
    std::vector<int> idx(static_cast<std::size_t>(batch));
    std::iota(idx.begin(), idx.end(), 0);
    prng.shuffle(idx);
    for (int j = 0; j < points; ++j) {
      auto& z = p.train_batch[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
      int wrong = static_cast<int>(prng.uniform_index(
          static_cast<std::size_t>(class_count - 1)));
      if (wrong >= z.label) ++wrong;
      z.label = wrong;
    }
  }
  return participants;
}

}  // namespace fedfilter

#endif  // FEDFILTER_DATA_HPP_
