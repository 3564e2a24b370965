#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eqa/experiments.hpp"

namespace {

// One-line machine-readable error on stderr.
int fail(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return 1;
}

std::string dir_or(const std::string& out, const eqa::ExperimentConfig& c) { return out.empty() ? c.output_dir : out; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and evaluate permutation-equivariant auction mechanisms"};
  app.require_subcommand(1);
  app.set_version_flag("--version", eqa::code_version());

  std::string config_arg, out_arg, checkpoint_arg, mode_arg, grid_arg;
  std::optional<std::uint64_t> seed_arg;

  auto* train = app.add_subcommand("train", "Train a mechanism and write checkpoint, metrics and summary");
  train->add_option("--config", config_arg, "Builtin config name or JSON file")->required();
  train->add_option("--seed", seed_arg, "Override the config seed");
  train->add_option("--out", out_arg, "Output directory (default: config output_dir)");

  auto* eval = app.add_subcommand("eval", "Test revenue and regret of a checkpoint");
  eval->add_option("--checkpoint", checkpoint_arg, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--seed", seed_arg, "Override the test-set seed");
  eval->add_option("--out", out_arg, "Output directory")->default_val(".");

  auto* diagnose = app.add_subcommand("diagnose", "Permutation sensitivity and exploitability of a checkpoint");
  diagnose->add_option("--checkpoint", checkpoint_arg, "Checkpoint file")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--mode", mode_arg, "Permutation mode")->check(CLI::IsMember({"exhaustive", "sampled"}));
  diagnose->add_option("--out", out_arg, "Output directory")->default_val(".");

  auto* generalize = app.add_subcommand("generalize", "Evaluate an equivariant checkpoint at other sizes");
  generalize->add_option("--checkpoint", checkpoint_arg, "Checkpoint file")->required()->check(CLI::ExistingFile);
  auto* grid_opt = generalize->add_option("--grid", grid_arg, "Sizes such as \"1x2,1x3\" (default: config grid)");
  generalize->add_option("--out", out_arg, "Output directory")->default_val(".");

  auto* sample_cmd = app.add_subcommand("sample", "Export the test set of a config as a pinned batch file");
  sample_cmd->add_option("--config", config_arg, "Builtin config name or JSON file")->required();
  sample_cmd->add_option("--seed", seed_arg, "Override the config seed");
  sample_cmd->add_option("--out", out_arg, "Output directory (default: config output_dir)");

  auto* list = app.add_subcommand("list-configs", "List builtin configs");
  auto* show = app.add_subcommand("show-config", "Print a config as JSON");
  show->add_option("--config", config_arg, "Builtin config name or JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*list) {
      for (const auto& name : eqa::builtin_names()) std::cout << name << '\n';
    } else if (*show) {
      std::cout << eqa::to_json(eqa::load_experiment(config_arg)).dump(2) << '\n';
    } else if (*train) {
      eqa::ExperimentConfig c = eqa::load_experiment(config_arg);
      if (seed_arg) c.seed = *seed_arg;
      const auto art = eqa::run_train(c, dir_or(out_arg, c));
      std::cout << nlohmann::json{{"checkpoint", art.checkpoint.string()},
                                  {"metrics", art.metrics_csv.string()},
                                  {"summary", art.summary_json.string()},
                                  {"test_revenue", art.test_revenue},
                                  {"test_regret", art.test_regret.mean}}
                       .dump()
                << '\n';
    } else if (*eval) {
      const auto art = eqa::run_eval(checkpoint_arg, out_arg, seed_arg);
      std::cout << nlohmann::json{{"report", art.report_json.string()},
                                  {"test_revenue", art.revenue},
                                  {"test_regret", art.regret.mean}}
                       .dump()
                << '\n';
    } else if (*diagnose) {
      std::optional<eqa::PermutationMode> mode;
      if (!mode_arg.empty()) mode = eqa::permutation_mode_from_string(mode_arg);
      const auto art = eqa::run_diagnose(checkpoint_arg, out_arg, mode);
      std::cout << nlohmann::json{{"report", art.report_json.string()},
                                  {"h_R", art.h_csv.string()},
                                  {"h_R_max", art.sensitivity.max},
                                  {"h_R_median", art.sensitivity.median},
                                  {"permutation_mode", eqa::to_string(art.sensitivity.mode)}}
                       .dump()
                << '\n';
    } else if (*generalize) {
      std::optional<eqa::SizeGrid> grid;
      if (grid_opt->count() > 0) grid = eqa::parse_grid(grid_arg);
      const auto art = eqa::run_generalize(checkpoint_arg, out_arg, grid);
      std::cout << nlohmann::json{{"table", art.table_csv.string()}, {"rows", art.rows.size()}}.dump() << '\n';
    } else if (*sample_cmd) {
      eqa::ExperimentConfig c = eqa::load_experiment(config_arg);
      if (seed_arg) c.seed = *seed_arg;
      std::cout << nlohmann::json{{"batch", eqa::run_sample(c, dir_or(out_arg, c)).string()}}.dump() << '\n';
    }
  } catch (const eqa::SizeBoundArchitecture& e) {
    return fail("size_bound_architecture", e.what());
  } catch (const eqa::PermutationCapExceeded& e) {
    return fail("permutation_cap_exceeded", e.what());
  } catch (const eqa::TrainingDiverged& e) {
    return fail("training_diverged", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what());
  } catch (const std::exception& e) {
    return fail("runtime_error", e.what());
  }
  return 0;
}
