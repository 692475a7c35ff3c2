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

#ifndef FEDFILTER_METRICS_HPP_
#define FEDFILTER_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedfilter/data.hpp"
#include "fedfilter/federation.hpp"
#include "fedfilter/model.hpp"

namespace fedfilter {

// Filtration quality. "Positive" means corrupted-and-rejected, so recall is
// the fraction of corrupted batches that were filtered out.
struct FiltrationMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  // Set when the corresponding ratio had an empty denominator and the
  // convention value 1 was used.
  bool recall_degenerate = false;
  bool precision_degenerate = false;
};

inline FiltrationMetrics metrics_from_confusion(long tp, long fp, long tn,
                                                long fn) {
  if (tp < 0 || fp < 0 || tn < 0 || fn < 0 || tp + fp + tn + fn == 0) {
    throw std::invalid_argument("metrics_from_confusion: invalid counts");
  }
  FiltrationMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  if (tp + fn == 0) {
    m.recall = 1.0;
    m.recall_degenerate = true;
  } else {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  if (tp + fp == 0) {
    m.precision = 1.0;
    m.precision_degenerate = true;
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  m.accuracy = static_cast<double>(tp + tn) /
               static_cast<double>(tp + fp + tn + fn);
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

// The only place where the ground-truth corruption flag meets the protocol's
// accept/reject decisions.
inline FiltrationMetrics compute_metrics(
    const RoundOutcome& outcome,
    const std::vector<ParticipantRecord>& participants) {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& p : participants) {
    const bool decided = outcome.accepted.count(p.id) ||
                         outcome.rejected.count(p.id);
    if (!decided) {
      throw std::invalid_argument("compute_metrics: no decision for " +
                                  std::to_string(p.id));
    }
    const bool rejected = outcome.rejected.count(p.id) > 0;
    if (p.is_corrupted && rejected) ++tp;
    if (!p.is_corrupted && rejected) ++fp;
    if (p.is_corrupted && !rejected) ++fn;
    if (!p.is_corrupted && !rejected) ++tn;
  }
  return metrics_from_confusion(tp, fp, tn, fn);
}

// Ids of the participants an ideal (ground-truth) filter would accept. Used
// by the harness as the perfect-filtering baseline.
inline std::vector<int> ground_truth_accept_ids(
    const std::vector<ParticipantRecord>& participants) {
  std::vector<int> ids;
  for (const auto& p : participants) {
    if (!p.is_corrupted) ids.push_back(p.id);
  }
  return ids;
}

// Fraction of argmax-correct predictions. Argmax ties resolve to the lowest
// class index.
inline double model_accuracy(const ModelState& m,
                             std::span<const LabeledExample> eval_set) {
  if (eval_set.empty()) {
    throw std::invalid_argument("model_accuracy: empty eval set");
  }
  std::size_t correct = 0;
  std::vector<double> logits;
  for (const auto& z : eval_set) {
    detail::check_example(m, z);
    detail::forward(m, z.features, logits, nullptr);
    const auto best = std::max_element(logits.begin(), logits.end());
    if (static_cast<int>(best - logits.begin()) == z.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(eval_set.size());
}

inline double model_accuracy(const ModelState& m, const Dataset& eval_set) {
  return model_accuracy(m, std::span<const LabeledExample>(eval_set.examples));
}

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample stddev; 0 for a single run
};

struct SweepCell {
  std::map<std::string, double> axis;  // axis name -> value
  std::vector<std::uint64_t> seeds;
  std::vector<FiltrationMetrics> runs;   // one per successful seed
  std::vector<std::string> failures;     // recorded per-seed errors
  std::map<std::string, MetricStats> stats;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  int runs_per_cell = 0;
};

using CellRunner = std::function<FiltrationMetrics(
    const std::map<std::string, double>& axis, std::uint64_t seed)>;

inline MetricStats mean_and_std(std::span<const double> values) {
  MetricStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return s;
}

inline void aggregate_cell(SweepCell& cell) {
  const std::pair<const char*, double FiltrationMetrics::*> fields[] = {
      {"recall", &FiltrationMetrics::recall},
      {"precision", &FiltrationMetrics::precision},
      {"accuracy", &FiltrationMetrics::accuracy},
      {"f1", &FiltrationMetrics::f1},
  };
  for (const auto& [name, member] : fields) {
    std::vector<double> values;
    values.reserve(cell.runs.size());
    for (const auto& run : cell.runs) values.push_back(run.*member);
    cell.stats[name] = mean_and_std(values);
  }
}

// Runs the cell runner over the cartesian product of the axes, once per
// seed, and aggregates mean and sample stddev per metric. A failing run is
// recorded in the cell and the sweep continues.
inline SweepResult sweep(const std::vector<SweepAxis>& axes,
                         const std::vector<std::uint64_t>& seeds,
                         const CellRunner& run) {
  if (seeds.empty()) {
    throw std::invalid_argument("sweep: need at least one seed");
  }
  for (const auto& axis : axes) {
    if (axis.values.empty()) {
      throw std::invalid_argument("sweep: empty axis " + axis.name);
    }
  }
  std::vector<std::map<std::string, double>> grid;
  grid.emplace_back();
  for (const auto& axis : axes) {
    std::vector<std::map<std::string, double>> next;
    for (const auto& partial : grid) {
      for (double v : axis.values) {
        auto cell = partial;
        cell[axis.name] = v;
        next.push_back(std::move(cell));
      }
    }
    grid = std::move(next);
  }

  SweepResult result;
  result.runs_per_cell = static_cast<int>(seeds.size());
  for (const auto& axis_values : grid) {
    SweepCell cell;
    cell.axis = axis_values;
    cell.seeds = seeds;
    for (std::uint64_t seed : seeds) {
      try {
        cell.runs.push_back(run(axis_values, seed));
      } catch (const std::exception& e) {
        cell.failures.push_back("seed " + std::to_string(seed) + ": " +
                                e.what());
      }
    }
    aggregate_cell(cell);
    result.cells.push_back(std::move(cell));
  }
  return result;
}

}  // namespace fedfilter

#endif  // FEDFILTER_METRICS_HPP_
