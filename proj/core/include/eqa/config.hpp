#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "eqa/evaluation.hpp"
#include "eqa/permutations.hpp"
#include "eqa/training.hpp"

namespace eqa {

using SizeGrid = std::vector<std::pair<std::size_t, std::size_t>>;

struct DiagnoseConfig {
  PermutationMode mode = PermutationMode::kExhaustive;
  std::uint64_t cap = 5040;
  std::size_t permutation_samples = 100;
  std::size_t profiles = 1000;  // test profiles used for h_R and exploitability
  friend bool operator==(const DiagnoseConfig&, const DiagnoseConfig&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  DistributionSpec distribution;
  TrainConfig train;  // distribution and seed are taken from the fields above
  std::size_t rho_period_epochs = 2;
  std::size_t test_samples = 10000;
  RegretEvalConfig eval;
  DiagnoseConfig diagnose;
  SizeGrid grid;
  std::string output_dir = "runs";

  // TrainConfig with distribution, seed and the epoch-based rho period applied.
  TrainConfig train_config() const;
  // Seeds of the independent test set, restart draws and permutation draws.
  std::uint64_t test_seed() const;
  RegretEvalConfig eval_config() const;
  PermutationOptions permutation_options() const;
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Key schema (all keys optional except name; unknown keys are rejected):
// {
//   "name": str, "seed": int, "output_dir": str,
//   "distribution": {"kind": "uniform01"|"heavytail_iv"|"exponential_scale",
//                    "bidders": int, "items": int, "scales": [num]},
//   "train": {"samples", "batch_size", "epochs", "misreport_steps", "misreport_lr",
//             "learning_rate", "rho_init", "rho_increment", "rho_period_epochs",
//             "lambda_period", "lambda_init": num | [num], "architecture": str,
//             "network": {"hidden_layers", "channels", "baseline_hidden_layers",
//                         "baseline_width"}},
//   "eval": {"test_samples", "steps", "step_size", "restarts", "max_samples"},
//   "diagnose": {"mode": "exhaustive"|"sampled", "cap", "permutation_samples", "profiles"},
//   "grid": "1x2,1x3" | [[n, m], ...]
// }
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_from_json(const nlohmann::json& j);

// A builtin name or a path to a JSON file.
ExperimentConfig load_experiment(const std::string& name_or_path);

std::vector<std::string> builtin_names();
bool is_builtin(const std::string& name);
ExperimentConfig builtin_experiment(const std::string& name);

// 16 hex digits of FNV-1a over the canonical JSON, excluding seed and
// output directory.
std::string config_hash(const ExperimentConfig& config);

// "1x2,2x3" -> {(1,2),(2,3)}; empty string -> empty grid.
SizeGrid parse_grid(const std::string& text);
std::string format_grid(const SizeGrid& grid);

}  // namespace eqa
