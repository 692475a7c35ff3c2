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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedfilter/experiment.hpp"

namespace {

struct FlagValues {
  std::string config_path;
  std::string preset;
  int participants = 0;
  int rounds = 0;
  double epsilon = 0.0;
  std::string alpha;
  int epochs = 0;
  double lr = 0.0;
  double clip = 0.0;
  double sigma = 0.0;
  double corrupt_frac = 0.0;
  double corrupt_points = 0.0;
  int train_batch = 0;
  int test_size = 0;
  double warmup_fraction = 0.0;
  int classes = 0;
  int dim = 0;
  int per_class = 0;
  double separation = 0.0;
  std::string data;
  std::string seeds;
  std::string out;
};

// Registers the shared experiment flags on a subcommand and returns the
// option pointers keyed by config name, so only flags the user actually set
// override the config file.
std::vector<std::pair<std::string, CLI::Option*>> add_experiment_flags(
    CLI::App* cmd, FlagValues& v) {
  std::vector<std::pair<std::string, CLI::Option*>> opts;
  cmd->add_option("--config", v.config_path, "JSON config file");
  opts.emplace_back("preset",
                    cmd->add_option("--preset", v.preset,
                                    "table1|fig2|fig4|fig6|custom"));
  opts.emplace_back("participants",
                    cmd->add_option("--participants", v.participants,
                                    "number of participants"));
  opts.emplace_back("rounds", cmd->add_option("--rounds", v.rounds,
                                              "federated rounds"));
  opts.emplace_back("epsilon", cmd->add_option("--epsilon", v.epsilon,
                                               "vote privacy budget"));
  opts.emplace_back("alpha",
                    cmd->add_option("--alpha", v.alpha,
                                    "Dirichlet concentration, or 'iid'"));
  opts.emplace_back("epochs", cmd->add_option("--epochs", v.epochs,
                                              "contributor local epochs"));
  opts.emplace_back("lr", cmd->add_option("--lr", v.lr,
                                          "contributor learning rate"));
  opts.emplace_back("clip", cmd->add_option("--clip", v.clip,
                                            "update clipping threshold"));
  opts.emplace_back("sigma", cmd->add_option("--sigma", v.sigma,
                                             "update noise multiplier"));
  opts.emplace_back("corrupt_frac",
                    cmd->add_option("--corrupt-frac", v.corrupt_frac,
                                    "fraction of corrupted participants"));
  opts.emplace_back("corrupt_points",
                    cmd->add_option("--corrupt-points", v.corrupt_points,
                                    "fraction of corrupted points per batch"));
  opts.emplace_back("train_batch",
                    cmd->add_option("--train-batch", v.train_batch,
                                    "train batch size per participant"));
  opts.emplace_back("test_size", cmd->add_option("--test-size", v.test_size,
                                                 "test set size per participant"));
  opts.emplace_back("warmup_fraction",
                    cmd->add_option("--warmup-fraction", v.warmup_fraction,
                                    "warm-up fraction of the dataset"));
  opts.emplace_back("classes", cmd->add_option("--classes", v.classes,
                                               "synthetic class count"));
  opts.emplace_back("dim", cmd->add_option("--dim", v.dim,
                                           "synthetic feature dimension"));
  opts.emplace_back("per_class", cmd->add_option("--per-class", v.per_class,
                                                 "synthetic points per class"));
  opts.emplace_back("separation",
                    cmd->add_option("--separation", v.separation,
                                    "synthetic class separation"));
  opts.emplace_back("data", cmd->add_option("--data", v.data,
                                            "CSV dataset path (label,f0,f1,...)"));
  opts.emplace_back("seeds", cmd->add_option("--seeds", v.seeds,
                                             "comma-separated seed list"));
  opts.emplace_back("out", cmd->add_option("--out", v.out,
                                           "output directory"));
  return opts;
}

nlohmann::json flags_to_json(
    const FlagValues& v,
    const std::vector<std::pair<std::string, CLI::Option*>>& opts) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, opt] : opts) {
    if (opt->count() == 0) continue;
    if (key == "preset") {
      j[key] = v.preset;
    } else if (key == "participants") {
      j[key] = v.participants;
    } else if (key == "rounds") {
      j[key] = v.rounds;
    } else if (key == "epsilon") {
      j[key] = v.epsilon;
    } else if (key == "alpha") {
      if (v.alpha == "iid") {
        j[key] = "iid";
      } else {
        j[key] = std::stod(v.alpha);
      }
    } else if (key == "epochs") {
      j[key] = v.epochs;
    } else if (key == "lr") {
      j[key] = v.lr;
    } else if (key == "clip") {
      j[key] = v.clip;
    } else if (key == "sigma") {
      j[key] = v.sigma;
    } else if (key == "corrupt_frac") {
      j[key] = v.corrupt_frac;
    } else if (key == "corrupt_points") {
      j[key] = v.corrupt_points;
    } else if (key == "train_batch") {
      j[key] = v.train_batch;
    } else if (key == "test_size") {
      j[key] = v.test_size;
    } else if (key == "warmup_fraction") {
      j[key] = v.warmup_fraction;
    } else if (key == "classes") {
      j[key] = v.classes;
    } else if (key == "dim") {
      j[key] = v.dim;
    } else if (key == "per_class") {
      j[key] = v.per_class;
    } else if (key == "separation") {
      j[key] = v.separation;
    } else if (key == "data") {
      j[key] = v.data;
    } else if (key == "seeds") {
      nlohmann::json seeds = nlohmann::json::array();
      std::stringstream ss(v.seeds);
      std::string field;
      while (std::getline(ss, field, ',')) {
        seeds.push_back(std::stoull(field));
      }
      j[key] = std::move(seeds);
    } else if (key == "out") {
      j[key] = v.out;
    }
  }
  return j;
}

std::vector<fedfilter::SweepAxis> parse_axes(
    const std::vector<std::string>& specs) {
  std::vector<fedfilter::SweepAxis> axes;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= s.size()) {
      throw std::invalid_argument("axis must look like key=v1,v2,... : " + s);
    }
    fedfilter::SweepAxis axis;
    axis.name = s.substr(0, eq);
    std::stringstream ss(s.substr(eq + 1));
    std::string field;
    while (std::getline(ss, field, ',')) {
      axis.values.push_back(field == "iid" ? 0.0 : std::stod(field));
    }
    if (axis.values.empty()) {
      throw std::invalid_argument("axis has no values: " + s);
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving data filtering simulator for federated learning"};
  app.require_subcommand(1);

  FlagValues run_flags;
  CLI::App* run_cmd = app.add_subcommand(
      "run", "Run a preset or custom experiment and write its artifacts");
  const auto run_opts = add_experiment_flags(run_cmd, run_flags);

  FlagValues sweep_flags;
  std::vector<std::string> axis_specs;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Sweep one or two parameters over a grid of cells");
  const auto sweep_opts = add_experiment_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--axis", axis_specs,
                        "axis as key=v1,v2,... (repeat for a grid)")
      ->required();

  int verify_instances = 56;
  std::uint64_t verify_seed = 1;
  int verify_epochs = 3;
  double verify_lr = 0.1;
  std::string verify_out;
  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "Check lazy influence signs against the exact retraining oracle");
  verify_cmd->add_option("--instances", verify_instances,
                         "number of convex test instances");
  verify_cmd->add_option("--seed", verify_seed, "base seed");
  verify_cmd->add_option("--epochs", verify_epochs, "lazy local epochs");
  verify_cmd->add_option("--lr", verify_lr, "lazy learning rate");
  verify_cmd->add_option("--out", verify_out, "optional output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const fedfilter::ExperimentSpec spec = fedfilter::parse_config_file(
          run_flags.config_path, flags_to_json(run_flags, run_opts));
      return fedfilter::run_experiment(spec);
    }

    if (sweep_cmd->parsed()) {
      fedfilter::ExperimentSpec spec = fedfilter::parse_config_file(
          sweep_flags.config_path, flags_to_json(sweep_flags, sweep_opts));
      const std::vector<fedfilter::SweepAxis> axes = parse_axes(axis_specs);
      std::filesystem::create_directories(spec.out_dir);
      {
        std::ofstream out(std::filesystem::path(spec.out_dir) / "config.json");
        out << fedfilter::spec_to_json(spec).dump(2) << '\n';
      }
      const fedfilter::SweepResult result =
          fedfilter::run_filtration_sweep(spec, axes, spec.out_dir);
      fedfilter::write_metrics_csv(
          result,
          (std::filesystem::path(spec.out_dir) / "metrics.csv").string());
      nlohmann::json summary = fedfilter::sweep_to_json(result);
      summary["preset"] = "sweep";
      std::ofstream sum(std::filesystem::path(spec.out_dir) / "summary.json");
      sum << summary.dump(2) << '\n';
      for (const auto& cell : result.cells) {
        const auto& s = cell.stats.at("recall");
        std::cout << fedfilter::detail::cell_name(cell.axis) << ": recall "
                  << s.mean << " +- " << s.stddev << '\n';
        if (!cell.failures.empty()) return 2;
      }
      return 0;
    }

    // verify
    const fedfilter::TrainConfig lazy_cfg{verify_epochs, verify_lr, true};
    const fedfilter::VerifyResult result =
        fedfilter::run_sign_agreement(verify_instances, verify_seed, lazy_cfg);
    for (const auto& t : result.trials) {
      std::cout << (t.corrupted_batch ? "corrupted" : "clean") << " batch: lazy "
                << (t.lazy > 0 ? "+1" : "-1") << " oracle "
                << (t.oracle > 0 ? "+1" : "-1")
                << (t.lazy == t.oracle ? "  match" : "  MISMATCH") << '\n';
    }
    std::cout << "sign agreement: " << result.agreement << " over "
              << result.trials.size() << " instances\n";
    if (!verify_out.empty()) {
      std::filesystem::create_directories(verify_out);
      nlohmann::json j;
      j["instances"] = result.trials.size();
      j["agreement"] = result.agreement;
      nlohmann::json trials = nlohmann::json::array();
      for (const auto& t : result.trials) {
        trials.push_back({{"seed", t.seed},
                          {"corrupted_batch", t.corrupted_batch},
                          {"lazy", t.lazy},
                          {"oracle", t.oracle},
                          {"oracle_value", t.oracle_value},
                          {"oracle_converged", t.oracle_converged}});
      }
      j["trials"] = std::move(trials);
      std::ofstream out(std::filesystem::path(verify_out) / "verify.json");
      out << j.dump(2) << '\n';
    }
    return result.agreement >= 0.9 ? 0 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
