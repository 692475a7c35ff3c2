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

#ifndef FEDFILTER_EXPERIMENT_HPP_
#define FEDFILTER_EXPERIMENT_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedfilter/data.hpp"
#include "fedfilter/federation.hpp"
#include "fedfilter/influence.hpp"
#include "fedfilter/metrics.hpp"
#include "fedfilter/model.hpp"
#include "fedfilter/privacy.hpp"
#include "fedfilter/rng.hpp"

namespace fedfilter {

struct SynthConfig {
  int class_count = 10;
  int dim = 16;
  int per_class = 1600;
  double separation = 4.0;
};

// Fully resolved experiment description. Defaults mirror the standard setup:
// 100 participants, epsilon 1, 30% corrupted batches with 90% of their
// points relabeled, 100/50 train/test split, 1% warm-up, 8 runs.
struct ExperimentSpec {
  std::string preset = "custom";  // table1 | fig2 | fig4 | fig6 | custom
  SynthConfig synth;
  std::string data_csv;  // when set, load this CSV instead of synthesizing
  FederationConfig fed;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  std::string out_dir = "out";
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "preset",      "participants", "rounds",        "epsilon",
      "alpha",       "epochs",       "lr",            "clip",
      "sigma",       "corrupt_frac", "corrupt_points", "train_batch",
      "test_size",   "warmup_fraction", "classes",    "dim",
      "per_class",   "separation",   "data",          "seeds",
      "out"};
  return keys;
}

inline double as_number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) {
    throw std::invalid_argument("config key '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline int as_int(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) {
    throw std::invalid_argument("config key '" + key + "' must be an integer");
  }
  return v.get<int>();
}

inline void apply_config(ExperimentSpec& spec, const nlohmann::json& cfg) {
  if (!cfg.is_object()) {
    throw std::invalid_argument("config must be a JSON object");
  }
  for (const auto& [key, value] : cfg.items()) {
    if (!known_config_keys().count(key)) {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
    if (key == "preset") {
      const std::string p = value.get<std::string>();
      if (p != "table1" && p != "fig2" && p != "fig4" && p != "fig6" &&
          p != "custom") {
        throw std::invalid_argument("unknown preset '" + p + "'");
      }
      spec.preset = p;
    } else if (key == "participants") {
      spec.fed.participant_count = as_int(value, key);
    } else if (key == "rounds") {
      spec.fed.rounds = as_int(value, key);
    } else if (key == "epsilon") {
      spec.fed.epsilon_target = as_number(value, key);
    } else if (key == "alpha") {
      if (value.is_null() || (value.is_string() && value == "iid")) {
        spec.fed.partition.dirichlet_alpha.reset();
      } else {
        spec.fed.partition.dirichlet_alpha = as_number(value, key);
      }
    } else if (key == "epochs") {
      spec.fed.train_cfg.local_epochs = as_int(value, key);
    } else if (key == "lr") {
      spec.fed.train_cfg.learning_rate = as_number(value, key);
    } else if (key == "clip") {
      spec.fed.noise_cfg.clip_threshold = as_number(value, key);
    } else if (key == "sigma") {
      spec.fed.noise_cfg.noise_multiplier = as_number(value, key);
    } else if (key == "corrupt_frac") {
      spec.fed.corruption.corrupt_participant_fraction = as_number(value, key);
    } else if (key == "corrupt_points") {
      spec.fed.corruption.corrupt_point_fraction = as_number(value, key);
    } else if (key == "train_batch") {
      spec.fed.partition.train_batch_size = as_int(value, key);
    } else if (key == "test_size") {
      spec.fed.partition.test_set_size = as_int(value, key);
    } else if (key == "warmup_fraction") {
      spec.fed.partition.warmup_fraction = as_number(value, key);
    } else if (key == "classes") {
      spec.synth.class_count = as_int(value, key);
    } else if (key == "dim") {
      spec.synth.dim = as_int(value, key);
    } else if (key == "per_class") {
      spec.synth.per_class = as_int(value, key);
    } else if (key == "separation") {
      spec.synth.separation = as_number(value, key);
    } else if (key == "data") {
      spec.data_csv = value.get<std::string>();
    } else if (key == "seeds") {
      if (!value.is_array() || value.empty()) {
        throw std::invalid_argument("config key 'seeds' must be a non-empty array");
      }
      spec.seeds.clear();
      for (const auto& s : value) {
        if (!s.is_number_integer()) {
          throw std::invalid_argument("config key 'seeds' must hold integers");
        }
        spec.seeds.push_back(s.get<std::uint64_t>());
      }
    } else if (key == "out") {
      spec.out_dir = value.get<std::string>();
    }
  }
}

inline void validate_spec(const ExperimentSpec& spec) {
  if (spec.fed.participant_count < 2) {
    throw std::invalid_argument("participants must be >= 2");
  }
  if (spec.fed.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (!(spec.fed.epsilon_target >= 0.0)) {
    throw std::invalid_argument("epsilon must be >= 0");
  }
  if (spec.fed.partition.dirichlet_alpha &&
      !(*spec.fed.partition.dirichlet_alpha > 0.0)) {
    throw std::invalid_argument("alpha must be > 0 (or \"iid\")");
  }
  if (spec.fed.train_cfg.local_epochs < 1) {
    throw std::invalid_argument("epochs must be >= 1");
  }
  if (!(spec.fed.train_cfg.learning_rate > 0.0)) {
    throw std::invalid_argument("lr must be > 0");
  }
  if (!(spec.fed.noise_cfg.clip_threshold > 0.0)) {
    throw std::invalid_argument("clip must be > 0");
  }
  if (!(spec.fed.noise_cfg.noise_multiplier >= 0.0)) {
    throw std::invalid_argument("sigma must be >= 0");
  }
  const auto& corr = spec.fed.corruption;
  if (corr.corrupt_participant_fraction < 0.0 ||
      corr.corrupt_participant_fraction > 1.0 ||
      corr.corrupt_point_fraction < 0.0 || corr.corrupt_point_fraction > 1.0) {
    throw std::invalid_argument("corruption fractions must be in [0,1]");
  }
  if (spec.fed.partition.train_batch_size < 1 ||
      spec.fed.partition.test_set_size < 1) {
    throw std::invalid_argument("train_batch/test_size must be >= 1");
  }
  if (!(spec.fed.partition.warmup_fraction > 0.0) ||
      !(spec.fed.partition.warmup_fraction < 1.0)) {
    throw std::invalid_argument("warmup_fraction must be in (0,1)");
  }
  if (spec.synth.class_count < 2 || spec.synth.dim < 1 ||
      spec.synth.per_class < 1 || !(spec.synth.separation > 0.0)) {
    throw std::invalid_argument("invalid synthetic dataset parameters");
  }
  if (spec.seeds.empty()) throw std::invalid_argument("need at least one seed");
}

}  // namespace detail

// Resolves an experiment spec from defaults, then the config file object,
// then the flag overrides, in that precedence order. Unknown keys are
// rejected by name.
inline ExperimentSpec parse_config(const nlohmann::json& file_cfg,
                                   const nlohmann::json& flag_cfg) {
  ExperimentSpec spec;
  detail::apply_config(spec, file_cfg);
  detail::apply_config(spec, flag_cfg);
  detail::validate_spec(spec);
  return spec;
}

inline ExperimentSpec parse_config_file(const std::string& path,
                                        const nlohmann::json& flag_cfg) {
  nlohmann::json file_cfg = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    in >> file_cfg;
  }
  return parse_config(file_cfg, flag_cfg);
}

inline nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["preset"] = spec.preset;
  j["participants"] = spec.fed.participant_count;
  j["rounds"] = spec.fed.rounds;
  j["epsilon"] = spec.fed.epsilon_target;
  if (spec.fed.partition.dirichlet_alpha) {
    j["alpha"] = *spec.fed.partition.dirichlet_alpha;
  } else {
    j["alpha"] = "iid";
  }
  j["epochs"] = spec.fed.train_cfg.local_epochs;
  j["lr"] = spec.fed.train_cfg.learning_rate;
  j["clip"] = spec.fed.noise_cfg.clip_threshold;
  j["sigma"] = spec.fed.noise_cfg.noise_multiplier;
  j["corrupt_frac"] = spec.fed.corruption.corrupt_participant_fraction;
  j["corrupt_points"] = spec.fed.corruption.corrupt_point_fraction;
  j["train_batch"] = spec.fed.partition.train_batch_size;
  j["test_size"] = spec.fed.partition.test_set_size;
  j["warmup_fraction"] = spec.fed.partition.warmup_fraction;
  j["classes"] = spec.synth.class_count;
  j["dim"] = spec.synth.dim;
  j["per_class"] = spec.synth.per_class;
  j["separation"] = spec.synth.separation;
  j["data"] = spec.data_csv;
  j["seeds"] = spec.seeds;
  j["out"] = spec.out_dir;
  return j;
}

// Smallest per-class size whose synthetic dataset leaves enough pool after
// the warm-up split for the requested partition.
inline int auto_per_class(const SynthConfig& synth, const PartitionConfig& part,
                          int participant_count) {
  const long need = static_cast<long>(participant_count) *
                    (part.train_batch_size + part.test_set_size);
  int per_class = synth.per_class;
  for (;;) {
    const long total = static_cast<long>(synth.class_count) * per_class;
    const long warm = std::llround(part.warmup_fraction *
                                   static_cast<double>(total));
    if (total - warm >= need) return per_class;
    per_class = static_cast<int>(per_class * 1.2) + 1;
  }
}

// Dataset for one run. Synthetic data is regenerated per seed (sized up when
// the participant count demands it); CSV data is loaded as-is.
inline Dataset dataset_for_run(const ExperimentSpec& spec,
                               const FederationConfig& cfg,
                               std::uint64_t seed) {
  if (!spec.data_csv.empty()) return load_csv(spec.data_csv);
  SynthConfig s = spec.synth;
  s.per_class = auto_per_class(s, cfg.partition, cfg.participant_count);
  return make_synthetic(s.class_count, s.dim, s.per_class, s.separation, seed);
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Short value form for slugs and cell names: integers print as integers.
inline std::string format_axis_value(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

inline std::string cell_name(const std::map<std::string, double>& axis) {
  if (axis.empty()) return "default";
  std::string name;
  for (const auto& [k, v] : axis) {
    if (!name.empty()) name += ";";
    if (k == "alpha" && v == 0.0) {
      name += "alpha=iid";
    } else {
      name += k + "=" + format_axis_value(v);
    }
  }
  return name;
}

inline std::string cell_slug(const std::map<std::string, double>& axis) {
  std::string slug = cell_name(axis);
  for (auto& c : slug) {
    if (c == ';' || c == '=') c = '_';
  }
  return slug;
}

inline nlohmann::json metrics_to_json(const FiltrationMetrics& m) {
  nlohmann::json j;
  j["recall"] = m.recall;
  j["precision"] = m.precision;
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["tn"] = m.tn;
  j["fn"] = m.fn;
  j["recall_degenerate"] = m.recall_degenerate;
  j["precision_degenerate"] = m.precision_degenerate;
  return j;
}

}  // namespace detail

// Applies one sweep-axis assignment to a federation config. alpha = 0 is the
// IID sentinel (alpha itself must be positive).
inline void apply_axis_value(FederationConfig& cfg, const std::string& key,
                             double value) {
  if (key == "participants") {
    cfg.participant_count = static_cast<int>(value);
  } else if (key == "epsilon") {
    cfg.epsilon_target = value;
  } else if (key == "alpha") {
    if (value == 0.0) {
      cfg.partition.dirichlet_alpha.reset();
    } else {
      cfg.partition.dirichlet_alpha = value;
    }
  } else if (key == "epochs") {
    cfg.train_cfg.local_epochs = static_cast<int>(value);
  } else if (key == "lr") {
    cfg.train_cfg.learning_rate = value;
  } else if (key == "corrupt_frac") {
    cfg.corruption.corrupt_participant_fraction = value;
  } else if (key == "sigma") {
    cfg.noise_cfg.noise_multiplier = value;
  } else if (key == "clip") {
    cfg.noise_cfg.clip_threshold = value;
  } else {
    throw std::invalid_argument("unknown sweep axis '" + key + "'");
  }
}

// Filtration sweep driver shared by the presets and the `sweep` verb. Runs
// one federation round per (cell, seed), writes outcome JSONs into out_dir
// when it is non-empty, and returns the aggregated sweep.
inline SweepResult run_filtration_sweep(const ExperimentSpec& spec,
                                        const std::vector<SweepAxis>& axes,
                                        const std::string& out_dir) {
  const CellRunner runner = [&](const std::map<std::string, double>& axis,
                                std::uint64_t seed) {
    FederationConfig cfg = spec.fed;
    for (const auto& [key, value] : axis) apply_axis_value(cfg, key, value);
    cfg.master_seed = seed;
    const Dataset data = dataset_for_run(spec, cfg, seed);
    const RoundRun run = run_round_with_participants(cfg, data);
    if (!out_dir.empty()) {
      const std::string slug = detail::cell_slug(axis);
      const std::string name = slug == "default"
                                   ? "outcome_" + std::to_string(seed) + ".json"
                                   : "outcome_" + slug + "_" +
                                         std::to_string(seed) + ".json";
      std::ofstream out(std::filesystem::path(out_dir) / name);
      out << outcome_to_json(run.outcome).dump(2) << '\n';
    }
    return compute_metrics(run.outcome, run.participants);
  };
  return sweep(axes, spec.seeds, runner);
}

inline void write_metrics_csv(const SweepResult& result,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open " + path);
  out << "cell,seed,metric,value\n";
  static const char* kMetrics[] = {"recall", "precision", "accuracy", "f1"};
  for (const auto& cell : result.cells) {
    const std::string name = detail::cell_name(cell.axis);
    for (std::size_t r = 0; r < cell.runs.size(); ++r) {
      const auto& m = cell.runs[r];
      const double values[] = {m.recall, m.precision, m.accuracy, m.f1};
      for (std::size_t k = 0; k < 4; ++k) {
        out << name << ',' << cell.seeds[r] << ',' << kMetrics[k] << ','
            << detail::format_double(values[k]) << '\n';
      }
    }
  }
}

inline nlohmann::json sweep_to_json(const SweepResult& result) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    nlohmann::json c;
    c["cell"] = detail::cell_name(cell.axis);
    nlohmann::json axis = nlohmann::json::object();
    for (const auto& [k, v] : cell.axis) axis[k] = v;
    c["axis"] = std::move(axis);
    c["seeds"] = cell.seeds;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& m : cell.runs) runs.push_back(detail::metrics_to_json(m));
    c["runs"] = std::move(runs);
    nlohmann::json stats = nlohmann::json::object();
    for (const auto& [metric, s] : cell.stats) {
      stats[metric] = {{"mean", s.mean}, {"std", s.stddev}};
    }
    c["stats"] = std::move(stats);
    c["failures"] = cell.failures;
    cells.push_back(std::move(c));
  }
  nlohmann::json j;
  j["runs_per_cell"] = result.runs_per_cell;
  j["cells"] = std::move(cells);
  return j;
}

// Accuracy of an unfiltered versus a perfectly filtered final model, per
// corruption rate. The perfect filter uses ground truth; the protocol is not
// involved.
struct BaselineCell {
  double mislabel_rate = 0.0;
  std::vector<double> unfiltered_accuracy;
  std::vector<double> oracle_accuracy;
};

inline std::vector<BaselineCell> run_corruption_baseline(
    const ExperimentSpec& spec, const std::vector<double>& rates) {
  std::vector<BaselineCell> cells;
  for (double rate : rates) {
    BaselineCell cell;
    cell.mislabel_rate = rate;
    for (std::uint64_t seed : spec.seeds) {
      FederationConfig cfg = spec.fed;
      cfg.master_seed = seed;
      cfg.corruption.corrupt_participant_fraction = rate;
      PartitionConfig part_cfg = cfg.partition;
      part_cfg.participant_count = cfg.participant_count;
      const Dataset data = dataset_for_run(spec, cfg, seed);
      auto [warmup, pool] = split_warmup(data, part_cfg, seed);
      const ModelState m0 =
          warmup_model(warmup, cfg.center_learning_rate, cfg.center_max_epochs,
                       cfg.center_grad_tol);
      PartitionResult part = dirichlet_partition(pool, part_cfg, seed);
      const std::vector<ParticipantRecord> participants =
          corrupt(std::move(part.participants), cfg.corruption,
                  data.class_count, seed);

      std::vector<LabeledExample> all_batches;
      std::vector<LabeledExample> clean_batches;
      const std::vector<int> keep = ground_truth_accept_ids(participants);
      const std::set<int> keep_set(keep.begin(), keep.end());
      for (const auto& p : participants) {
        all_batches.insert(all_batches.end(), p.train_batch.begin(),
                           p.train_batch.end());
        if (keep_set.count(p.id)) {
          clean_batches.insert(clean_batches.end(), p.train_batch.begin(),
                               p.train_batch.end());
        }
      }
      // Held-out evaluation data from the same class distribution.
      const Dataset eval_set = make_synthetic(
          spec.synth.class_count, spec.synth.dim, 200, spec.synth.separation,
          derive_seed(seed, {substream::kSynthesis, 0xE7A1}));

      const ModelState unfiltered =
          fit_until(m0, all_batches, cfg.center_learning_rate,
                    cfg.center_max_epochs, cfg.center_grad_tol)
              .model;
      cell.unfiltered_accuracy.push_back(model_accuracy(unfiltered, eval_set));
      if (clean_batches.empty()) {
        cell.oracle_accuracy.push_back(model_accuracy(m0, eval_set));
      } else {
        const ModelState filtered =
            fit_until(m0, clean_batches, cfg.center_learning_rate,
                      cfg.center_max_epochs, cfg.center_grad_tol)
                .model;
        cell.oracle_accuracy.push_back(model_accuracy(filtered, eval_set));
      }
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

// Lazy-vs-exact sign agreement over seeded desk-scale convex instances.
// Instances alternate fully clean and fully corrupted candidate batches; the
// lazy side performs the usual few local epochs, the exact side retrains.
struct VerifyTrial {
  std::uint64_t seed = 0;
  bool corrupted_batch = false;
  int lazy = 0;
  int oracle = 0;
  double oracle_value = 0.0;
  bool oracle_converged = false;
};

struct VerifyResult {
  std::vector<VerifyTrial> trials;
  double agreement = 0.0;
};

inline VerifyResult run_sign_agreement(int instances, std::uint64_t base_seed,
                                       const TrainConfig& lazy_cfg,
                                       const OracleConfig& oracle_cfg = {}) {
  if (instances < 1) {
    throw std::invalid_argument("run_sign_agreement: need >= 1 instances");
  }
  constexpr int kClasses = 10;
  constexpr int kDim = 8;
  constexpr int kTrain = 120;
  constexpr int kBatch = 50;
  constexpr int kEval = 200;
  VerifyResult result;
  for (int k = 0; k < instances; ++k) {
    VerifyTrial trial;
    trial.seed = derive_seed(base_seed, {static_cast<std::uint64_t>(k)});
    trial.corrupted_batch = (k % 2 == 1);
    const int per_class = (kTrain + kBatch + kEval) / kClasses + 2;
    const Dataset data =
        make_synthetic(kClasses, kDim, per_class, 4.0, trial.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(trial.seed, {0xA11Au}));
    rng.shuffle(order);
    std::vector<LabeledExample> train_set, batch, eval_set;
    std::size_t next = 0;
    for (int i = 0; i < kTrain; ++i) train_set.push_back(data.examples[order[next++]]);
    for (int i = 0; i < kBatch; ++i) batch.push_back(data.examples[order[next++]]);
    for (int i = 0; i < kEval; ++i) eval_set.push_back(data.examples[order[next++]]);
    if (trial.corrupted_batch) {
      for (auto& z : batch) {
        int wrong = static_cast<int>(rng.uniform_index(kClasses - 1));
        if (wrong >= z.label) ++wrong;
        z.label = wrong;
      }
    }
    const ModelState tmpl = make_linear_model(kDim, kClasses);
    const ModelState base = fit_until(tmpl, train_set, oracle_cfg.learning_rate,
                                      oracle_cfg.max_epochs,
                                      oracle_cfg.grad_tol)
                                .model;
    TrainConfig lazy = lazy_cfg;
    lazy.freeze_body = true;
    Rng lazy_rng(derive_seed(trial.seed, {0x1A2Bu}));
    const ModelState updated = train(base, batch, lazy, lazy_rng);
    trial.lazy = lazy_sign(eval_set, base, updated);
    const InfluenceOracleResult oracle =
        exact_influence(train_set, batch, eval_set, tmpl, oracle_cfg);
    trial.oracle = oracle.sign;
    trial.oracle_value = oracle.value;
    trial.oracle_converged = oracle.converged;
    result.trials.push_back(trial);
  }
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(result.trials.size());
  for (const auto& t : result.trials) pairs.emplace_back(t.lazy, t.oracle);
  result.agreement = sign_agreement(pairs);
  return result;
}

// Runs a preset end to end and writes config.json, per-run outcome JSONs,
// metrics.csv and summary.json into spec.out_dir. Returns a process exit
// status; failures identify the stage on stderr.
inline int run_experiment(const ExperimentSpec& spec) {
  std::string stage = "config";
  try {
    detail::validate_spec(spec);
    std::filesystem::create_directories(spec.out_dir);
    {
      std::ofstream out(std::filesystem::path(spec.out_dir) / "config.json");
      if (!out) {
        throw std::invalid_argument("cannot write to " + spec.out_dir);
      }
      out << spec_to_json(spec).dump(2) << '\n';
    }

    if (spec.preset == "fig2") {
      stage = "baseline";
      const std::vector<double> rates = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
      const std::vector<BaselineCell> cells =
          run_corruption_baseline(spec, rates);
      stage = "write";
      std::ofstream csv(std::filesystem::path(spec.out_dir) / "metrics.csv");
      csv << "cell,seed,metric,value\n";
      for (const auto& cell : cells) {
        const std::string name =
            "corrupt_frac=" + detail::format_axis_value(cell.mislabel_rate);
        for (std::size_t r = 0; r < cell.unfiltered_accuracy.size(); ++r) {
          csv << name << ',' << spec.seeds[r] << ",unfiltered_accuracy,"
              << detail::format_double(cell.unfiltered_accuracy[r]) << '\n';
          csv << name << ',' << spec.seeds[r] << ",oracle_accuracy,"
              << detail::format_double(cell.oracle_accuracy[r]) << '\n';
        }
      }
      std::ofstream fig(std::filesystem::path(spec.out_dir) / "fig2.csv");
      fig << "mislabel_rate,unfiltered_accuracy,oracle_filtered_accuracy\n";
      nlohmann::json summary_cells = nlohmann::json::array();
      for (const auto& cell : cells) {
        const MetricStats unf = mean_and_std(cell.unfiltered_accuracy);
        const MetricStats orc = mean_and_std(cell.oracle_accuracy);
        fig << detail::format_double(cell.mislabel_rate) << ','
            << detail::format_double(unf.mean) << ','
            << detail::format_double(orc.mean) << '\n';
        summary_cells.push_back(
            {{"mislabel_rate", cell.mislabel_rate},
             {"unfiltered_accuracy", {{"mean", unf.mean}, {"std", unf.stddev}}},
             {"oracle_accuracy", {{"mean", orc.mean}, {"std", orc.stddev}}}});
      }
      nlohmann::json summary;
      summary["preset"] = spec.preset;
      summary["cells"] = std::move(summary_cells);
      std::ofstream sum(std::filesystem::path(spec.out_dir) / "summary.json");
      sum << summary.dump(2) << '\n';
      return 0;
    }

    stage = "sweep";
    std::vector<SweepAxis> axes;
    if (spec.preset == "table1") {
      axes.push_back({"alpha", {0.0, 0.1}});
    } else if (spec.preset == "fig4") {
      axes.push_back({"epochs", {1, 3, 5, 9}});
      axes.push_back({"lr", {0.01, 0.05, 0.1, 0.5}});
    } else if (spec.preset == "fig6") {
      axes.push_back({"participants", {50, 100, 200}});
      axes.push_back({"epsilon", {0.75, 1.0, 2.0}});
    }
    const SweepResult result = run_filtration_sweep(spec, axes, spec.out_dir);

    stage = "write";
    write_metrics_csv(result,
                      (std::filesystem::path(spec.out_dir) / "metrics.csv")
                          .string());
    nlohmann::json summary = sweep_to_json(result);
    summary["preset"] = spec.preset;
    std::ofstream sum(std::filesystem::path(spec.out_dir) / "summary.json");
    sum << summary.dump(2) << '\n';
    for (const auto& cell : result.cells) {
      if (!cell.failures.empty()) {
        for (const auto& f : cell.failures) {
          std::cerr << "cell " << detail::cell_name(cell.axis) << " failed: "
                    << f << '\n';
        }
        return 2;
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "stage " << stage << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fedfilter

#endif  // FEDFILTER_EXPERIMENT_HPP_
