#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eqa/checkpoint.hpp"
#include "eqa/config.hpp"
#include "eqa/evaluation.hpp"

namespace eqa {

// "<name>-<hash>-seed<seed>", shared by every artifact of a run.
std::string artifact_stem(const ExperimentConfig& config);

// The independently seeded test set of the experiment.
SampleBatch test_batch(const ExperimentConfig& config);

struct TrainArtifacts {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_csv;
  std::filesystem::path summary_json;
  double test_revenue = 0.0;
  RegretReport test_regret;
  std::vector<MetricsRecord> metrics;
};

// Trains, writing a checkpoint after every epoch, the per-epoch metrics
// CSV and a JSON summary with the final test metrics.
TrainArtifacts run_train(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct LoadedRun {
  Checkpoint checkpoint;
  ExperimentConfig config;
};
LoadedRun load_run(const std::filesystem::path& checkpoint);

struct EvalArtifacts {
  std::filesystem::path report_json;
  double revenue = 0.0;
  RegretReport regret;
};
EvalArtifacts run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& out_dir,
                       std::optional<std::uint64_t> seed = std::nullopt);

struct DiagnoseArtifacts {
  std::filesystem::path report_json;
  std::filesystem::path h_csv;
  std::filesystem::path histogram_csv;
  SensitivityReport sensitivity;
  ExploitabilityReport exploitability;
};
DiagnoseArtifacts run_diagnose(const std::filesystem::path& checkpoint, const std::filesystem::path& out_dir,
                               std::optional<PermutationMode> mode = std::nullopt);

struct GeneralizeArtifacts {
  std::filesystem::path table_csv;
  std::vector<CrossSizeResult> rows;
};
// Uses the config's grid when `grid` is not given.
GeneralizeArtifacts run_generalize(const std::filesystem::path& checkpoint, const std::filesystem::path& out_dir,
                                   std::optional<SizeGrid> grid = std::nullopt);

// Exports the experiment's test set as a pinned batch file.
std::filesystem::path run_sample(const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace eqa
