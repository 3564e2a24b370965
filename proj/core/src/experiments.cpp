#include "eqa/experiments.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "eqa/report_io.hpp"

namespace eqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json provenance(const ExperimentConfig& config) {
  return {{"name", config.name},
          {"config_hash", config_hash(config)},
          {"seed", config.seed},
          {"code_version", code_version()}};
}

Checkpoint make_checkpoint(const ExperimentConfig& config, const LearnedMechanism& mechanism,
                           const LagrangianState& state, std::size_t epoch) {
  Checkpoint c;
  c.mechanism = mechanism.clone();
  c.network = config.train.network;
  c.bidders = config.distribution.bidders;
  c.items = config.distribution.items;
  c.lagrangian = state;
  c.config_hash = config_hash(config);
  c.seed = config.seed;
  c.epoch = epoch;
  c.config = to_json(config);
  return c;
}

void add_regret(json& doc, const std::string& prefix, const RegretReport& r) {
  doc[prefix] = r.mean;
  for (std::size_t i = 0; i < r.per_bidder.size(); ++i) doc[prefix + "_" + std::to_string(i + 1)] = r.per_bidder[i];
  doc[prefix + "_samples"] = r.samples;
}

}  // namespace

std::string artifact_stem(const ExperimentConfig& config) {
  return config.name + "-" + config_hash(config) + "-seed" + std::to_string(config.seed);
}

SampleBatch test_batch(const ExperimentConfig& config) {
  return sample(config.distribution, config.test_samples, config.test_seed());
}

TrainArtifacts run_train(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  ensure_writable_dir(out_dir);
  const std::string stem = artifact_stem(config);
  TrainArtifacts art;
  art.checkpoint = out_dir / (stem + ".ckpt");
  art.metrics_csv = out_dir / (stem + "-metrics.csv");
  art.summary_json = out_dir / (stem + "-summary.json");

  const std::size_t n = config.distribution.bidders;
  std::vector<std::string> header{"epoch", "mean_revenue"};
  for (std::size_t i = 1; i <= n; ++i) header.push_back("rgt_" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) header.push_back("lambda_" + std::to_string(i));
  header.push_back("rho");
  header.push_back("wall_time_s");
  CsvWriter metrics(art.metrics_csv, header);

  const TrainConfig tc = config.train_config();
  const auto on_epoch = [&](const MetricsRecord& r, const LearnedMechanism& mech, const LagrangianState& state) {
    std::vector<std::string> row{std::to_string(r.epoch), format_number(r.mean_revenue)};
    for (double x : r.regret) row.push_back(format_number(x));
    for (double x : r.lambda) row.push_back(format_number(x));
    row.push_back(format_number(r.rho));
    row.push_back(format_number(r.wall_time_s));
    metrics.row(row);
    save_checkpoint(art.checkpoint, make_checkpoint(config, mech, state, r.epoch));
  };

  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  try {
    result = train(tc, on_epoch);
  } catch (const TrainingDiverged& e) {
    save_checkpoint(art.checkpoint, make_checkpoint(config, *e.last_good(), e.state(), e.completed_epochs()));
    throw;
  }
  const double train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (result.metrics.empty()) save_checkpoint(art.checkpoint, make_checkpoint(config, *result.mechanism, result.lagrangian, 0));

  const SampleBatch test = test_batch(config);
  art.test_revenue = revenue(*result.mechanism, test.values);
  art.test_regret = test_regret(*result.mechanism, test, config.eval_config());
  art.metrics = result.metrics;

  json summary = provenance(config);
  summary["architecture"] = to_string(tc.architecture);
  summary["bidders"] = n;
  summary["items"] = config.distribution.items;
  summary["epochs"] = result.metrics.size();
  summary["test_samples"] = test.count();
  summary["test_revenue"] = art.test_revenue;
  add_regret(summary, "test_regret", art.test_regret);
  summary["final_train_revenue"] = result.metrics.empty() ? json(nullptr) : json(result.metrics.back().mean_revenue);
  summary["train_wall_time_s"] = train_seconds;
  write_json(art.summary_json, summary);
  return art;
}

LoadedRun load_run(const fs::path& checkpoint) {
  LoadedRun run{load_checkpoint(checkpoint), {}};
  if (run.checkpoint.config.is_null()) throw std::runtime_error("checkpoint carries no experiment config: " + checkpoint.string());
  run.config = experiment_from_json(run.checkpoint.config);
  return run;
}

EvalArtifacts run_eval(const fs::path& checkpoint, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  LoadedRun run = load_run(checkpoint);
  if (seed) run.config.seed = *seed;
  ensure_writable_dir(out_dir);
  EvalArtifacts art;
  art.report_json = out_dir / (artifact_stem(run.config) + "-eval.json");
  const SampleBatch test = test_batch(run.config);
  art.revenue = revenue(*run.checkpoint.mechanism, test.values);
  art.regret = test_regret(*run.checkpoint.mechanism, test, run.config.eval_config());
  json doc = provenance(run.config);
  doc["checkpoint_epoch"] = run.checkpoint.epoch;
  doc["test_samples"] = test.count();
  doc["test_revenue"] = art.revenue;
  add_regret(doc, "test_regret", art.regret);
  write_json(art.report_json, doc);
  return art;
}

DiagnoseArtifacts run_diagnose(const fs::path& checkpoint, const fs::path& out_dir,
                               std::optional<PermutationMode> mode) {
  LoadedRun run = load_run(checkpoint);
  if (mode) run.config.diagnose.mode = *mode;
  ensure_writable_dir(out_dir);
  const ExperimentConfig& cfg = run.config;
  const std::string stem = artifact_stem(cfg);
  DiagnoseArtifacts art;
  art.report_json = out_dir / (stem + "-diagnose.json");
  art.h_csv = out_dir / (stem + "-hR.csv");
  art.histogram_csv = out_dir / (stem + "-hR-histogram.csv");

  const SampleBatch test = test_batch(cfg);
  const Tensor values = test.subset(0, std::min(cfg.diagnose.profiles, test.count())).values;
  const PermutationOptions options = cfg.permutation_options();
  art.sensitivity = permutation_sensitivity(*run.checkpoint.mechanism, values, options);
  art.exploitability = exploitability(*run.checkpoint.mechanism, values, options);

  {
    CsvWriter h(art.h_csv, {"sample", "h_R"});
    for (std::size_t l = 0; l < art.sensitivity.h.size(); ++l) {
      h.row({std::to_string(l), format_number(art.sensitivity.h[l])});
    }
    CsvWriter hist(art.histogram_csv, {"bin", "lower", "upper", "count"});
    for (std::size_t b = 0; b < art.sensitivity.histogram.size(); ++b) {
      hist.row({std::to_string(b), format_number(art.sensitivity.bin_edges[b]),
                format_number(art.sensitivity.bin_edges[b + 1]), std::to_string(art.sensitivity.histogram[b])});
    }
  }

  json doc = provenance(cfg);
  doc["architecture"] = to_string(run.checkpoint.mechanism->architecture());
  doc["profiles"] = values.dim(0);
  doc["permutation_mode"] = to_string(art.sensitivity.mode);
  doc["permutations"] = art.sensitivity.permutations;
  doc["h_R_max"] = art.sensitivity.max;
  doc["h_R_median"] = art.sensitivity.median;
  doc["exploitability_mode"] = to_string(art.exploitability.mode);
  doc["exploitability_permutations"] = art.exploitability.permutations;
  doc["R_opt"] = art.exploitability.r_opt;
  doc["R_adv"] = art.exploitability.r_adv;
  doc["exploitability_defined"] = art.exploitability.defined;
  doc["exploitability_percent"] = number_or_null(art.exploitability.loss_percent);
  write_json(art.report_json, doc);
  return art;
}

GeneralizeArtifacts run_generalize(const fs::path& checkpoint, const fs::path& out_dir, std::optional<SizeGrid> grid) {
  LoadedRun run = load_run(checkpoint);
  const LearnedMechanism& mech = *run.checkpoint.mechanism;
  if (mech.architecture() != Architecture::kEquivariant) {
    throw SizeBoundArchitecture("size-bound architecture: " + mech.name() + " cannot be evaluated at another size");
  }
  ensure_writable_dir(out_dir);
  const ExperimentConfig& cfg = run.config;
  const SizeGrid sizes = grid ? *grid : cfg.grid;
  for (const auto& [n, m] : sizes) cfg.distribution.resized(n, m);

  GeneralizeArtifacts art;
  art.table_csv = out_dir / (artifact_stem(cfg) + "-generalize.csv");
  CsvWriter table(art.table_csv, {"bidders", "items", "revenue", "regret"});
  for (const auto& [n, m] : sizes) {
    const SampleBatch batch = sample(cfg.distribution.resized(n, m), cfg.test_samples, cfg.test_seed());
    CrossSizeResult r = cross_size_eval(mech, batch, cfg.eval_config());
    table.row({std::to_string(n), std::to_string(m), format_number(r.revenue), format_number(r.regret.mean)});
    art.rows.push_back(std::move(r));
  }
  return art;
}

fs::path run_sample(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  ensure_writable_dir(out_dir);
  const fs::path path = out_dir / (artifact_stem(config) + "-test.batch");
  save_batch(test_batch(config), path);
  return path;
}

}  // namespace eqa
