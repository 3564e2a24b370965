#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eqa/evaluation.hpp"
#include "eqa/experiments.hpp"
#include "eqa/layers.hpp"
#include "eqa/networks.hpp"
#include "eqa/permutations.hpp"
#include "eqa/training.hpp"
#include "eqa/valuations.hpp"
#include "support/gradient_checks.hpp"
#include "support/toy_mechanisms.hpp"

namespace fs = std::filesystem;
using namespace eqa;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct TrainedRun {
  ExperimentConfig config;
  std::shared_ptr<LearnedMechanism> mechanism;
  double test_revenue = 0.0;
  double test_regret = 0.0;
};

// Trains a builtin once per work directory; later criteria reuse the run.
class RunCache {
 public:
  explicit RunCache(fs::path dir) : dir_(std::move(dir)) {}

  const TrainedRun& get(const std::string& name) {
    if (auto it = runs_.find(name); it != runs_.end()) return it->second;
    ExperimentConfig config = builtin_experiment(name);
    const std::string stem = artifact_stem(config);
    const fs::path ckpt = dir_ / (stem + ".ckpt");
    const fs::path summary = dir_ / (stem + "-summary.json");
    TrainedRun run;
    run.config = config;
    if (fs::exists(ckpt) && fs::exists(summary)) {
      std::ifstream is(summary);
      const auto j = nlohmann::json::parse(is);
      run.test_revenue = j.at("test_revenue").get<double>();
      run.test_regret = j.at("test_regret").get<double>();
    } else {
      std::fprintf(stderr, "training %s ...\n", name.c_str());
      const TrainArtifacts art = run_train(config, dir_);
      run.test_revenue = art.test_revenue;
      run.test_regret = art.test_regret.mean;
    }
    run.mechanism = std::shared_ptr<LearnedMechanism>(load_checkpoint(ckpt).mechanism.release());
    return runs_.emplace(name, std::move(run)).first->second;
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, TrainedRun> runs_;
};

Outcome reproduction(RunCache& cache, const std::string& name, double lo, double hi, double max_regret) {
  const TrainedRun& run = cache.get(name);
  const bool rev_ok = run.test_revenue >= lo && run.test_revenue <= hi;
  const bool rgt_ok = max_regret <= 0.0 || run.test_regret < max_regret;
  std::string detail = name + " revenue " + fmt("%.4f", run.test_revenue) + " in [" + fmt("%g", lo) + ", " +
                       fmt("%g", hi) + "], regret " + fmt("%.3g", run.test_regret);
  if (max_regret > 0.0) detail += " < " + fmt("%g", max_regret);
  return {rev_ok && rgt_ok, detail};
}

Tensor uniform_profile(std::size_t n, std::size_t m, Rng& rng) {
  Tensor t(Shape{1, n, m});
  for (double& x : t.data()) x = rng.uniform();
  return t;
}

PermutationPair random_pair(std::size_t n, std::size_t m, Rng& rng) {
  return {random_permutation(n, rng), random_permutation(m, rng)};
}

std::unique_ptr<LearnedMechanism> quickly_trained_equivariant() {
  TrainConfig tc;
  tc.distribution = DistributionSpec::uniform(2, 3);
  tc.samples = 200;
  tc.batch_size = 50;
  tc.epochs = 2;
  tc.misreport_steps = 5;
  tc.seed = 21;
  return train(tc).mechanism;
}

Outcome exact_equivariance() {
  const EquivariantNet random_net(NetworkConfig{}, 17);
  const auto trained = quickly_trained_equivariant();
  Rng rng(2024);
  double worst_random = 0.0, worst_trained = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(4), m = 1 + rng.below(5);
    const Tensor b = uniform_profile(n, m, rng);
    const std::vector<PermutationPair> pair{random_pair(n, m, rng)};
    worst_random = std::max(worst_random, equivariance_deviation(random_net, b, pair));
    worst_trained = std::max(worst_trained, equivariance_deviation(*trained, b, pair));
  }
  return {worst_random <= 1e-9 && worst_trained <= 1e-9,
          "max deviation random " + fmt("%.3g", worst_random) + ", trained " + fmt("%.3g", worst_trained) +
              " over 100 triples up to 4x5"};
}

Outcome diagnostics() {
  const EquivariantNet net(NetworkConfig{}, 5);
  const Tensor values = sample(DistributionSpec::uniform(3, 3), 200, 8).values;
  const SensitivityReport h = permutation_sensitivity(net, values);
  const ExploitabilityReport l = exploitability(net, values);
  const testing::PayFirstBid toy;
  const Tensor bids(Shape{1, 2, 1}, std::vector<double>{1.0, 0.0});
  const SensitivityReport toy_h = permutation_sensitivity(toy, bids);
  const ExploitabilityReport toy_l = exploitability(toy, bids);
  const bool pass = h.max <= 1e-9 && std::abs(l.loss_percent) <= 1e-7 && std::abs(toy_h.max - 1.0) <= 1e-12 &&
                    std::abs(toy_l.loss_percent - 100.0) <= 1e-9;
  return {pass, "equivariant h_R " + fmt("%.3g", h.max) + ", l " + fmt("%.3g", l.loss_percent) + "%; toy h_R " +
                    fmt("%g", toy_h.max) + ", l " + fmt("%g", toy_l.loss_percent) + "%"};
}

Outcome asymmetry(RunCache& cache) {
  const TrainedRun& base = cache.get("setting_I_regretnet");
  const TrainedRun& eq = cache.get("setting_I");
  const SampleBatch test = test_batch(eq.config);
  const Tensor values = test.subset(0, std::min<std::size_t>(eq.config.diagnose.profiles, test.count())).values;
  const double h_base = permutation_sensitivity(*base.mechanism, values).median;
  const double h_eq = permutation_sensitivity(*eq.mechanism, values).median;
  return {h_base > 0.01 && h_eq <= 1e-9,
          "median h_R regretnet " + fmt("%.4g", h_base) + " > 0.01, equivariant " + fmt("%.3g", h_eq)};
}

Outcome gradients() {
  double worst_op = 0.0;
  const auto cases = testing::op_cases();
  for (std::size_t c = 0; c < cases.size(); ++c) {
    Rng rng(100 + c);
    Tensor x = testing::random_tensor(cases[c].shape, rng);
    for (double& v : x.data()) {
      if (std::abs(v) < 0.05) v += 0.1;
    }
    worst_op = std::max(worst_op, testing::op_gradient_error(cases[c].op, x));
  }

  Rng rng(7);
  for (Activation act : {Activation::kIdentity, Activation::kTanh}) {
    const ExchangeableLayer layer = ExchangeableLayer::glorot(2, 3, act, rng);
    const Tensor x = testing::random_tensor(Shape{2, 3, 2, 2}, rng);
    const Tensor fields[] = {layer.entry, layer.bidder_pool, layer.item_pool, layer.global_pool, layer.bias};
    auto bind_with = [&](ad::Tape& t, int replaced, ad::Var v) {
      ExchangeableVars w{t.constant(fields[0]), t.constant(fields[1]), t.constant(fields[2]), t.constant(fields[3]),
                         t.constant(fields[4])};
      ad::Var* slots[] = {&w.entry, &w.bidder_pool, &w.item_pool, &w.global_pool, &w.bias};
      if (replaced >= 0) *slots[replaced] = v;
      return w;
    };
    worst_op = std::max(worst_op, testing::op_gradient_error(
                                      [&](ad::Var in) { return exchangeable(in, bind_with(in.tape(), -1, in), act); },
                                      x));
    for (int f = 0; f < 5; ++f) {
      worst_op = std::max(worst_op, testing::op_gradient_error(
                                        [&, f](ad::Var w) {
                                          return exchangeable(w.tape().constant(x), bind_with(w.tape(), f, w), act);
                                        },
                                        fields[f]));
    }
    const DenseLayer d = DenseLayer::glorot(4, 3, act, rng);
    const Tensor dx = testing::random_tensor(Shape{5, 4}, rng);
    worst_op = std::max(worst_op, testing::op_gradient_error(
                                      [&](ad::Var in) {
                                        return dense(in, in.tape().constant(d.weight), in.tape().constant(d.bias), act);
                                      },
                                      dx));
    worst_op = std::max(worst_op, testing::op_gradient_error(
                                      [&](ad::Var w) {
                                        return dense(w.tape().constant(dx), w, w.tape().constant(d.bias), act);
                                      },
                                      d.weight));
  }

  EquivariantNet net(NetworkConfig{1, 2, 2, 100}, 13);
  const DistributionSpec spec = DistributionSpec::uniform(2, 2);
  const Tensor values = sample(spec, 1, 14).values;
  const Tensor mis = sample(spec, 1, 15).values;
  const std::vector<double> lam{1.0, 1.0};
  const auto grads = lagrangian_gradient(net, lam, 2.0, values, mis);
  double worst_e2e = 0.0;
  for (std::size_t k = 0; k < net.parameters().size(); ++k) {
    auto f = [&](const Tensor& w) {
      EquivariantNet probe = net;
      probe.parameters()[k].value = w;
      return lagrangian_value(probe, lam, 2.0, values, mis);
    };
    worst_e2e = std::max(
        worst_e2e, testing::relative_error(grads[k], testing::numeric_gradient(f, net.parameters()[k].value), 1e-6));
  }
  return {worst_op <= 1e-4 && worst_e2e <= 1e-3,
          "worst op/layer rel err " + fmt("%.3g", worst_op) + ", lagrangian " + fmt("%.3g", worst_e2e)};
}

Outcome generalization(RunCache& cache) {
  const TrainedRun& run = cache.get("alpha");
  const SampleBatch batch = sample(DistributionSpec::uniform(1, 2), run.config.test_samples, run.config.test_seed());
  const double rev = revenue(*run.mechanism, batch.values);
  const double bound = 0.85 * 0.55;
  return {rev >= bound, "1x5-trained revenue on 1x2 " + fmt("%.4f", rev) + " >= " + fmt("%.4f", bound)};
}

Outcome symmetrization() {
  double worst_sym = 0.0;
  const std::vector<std::shared_ptr<const Mechanism>> mechanisms{std::make_shared<testing::PayFirstBid>()};
  for (auto [n, m] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 2}, {2, 3}, {3, 3}}) {
    std::vector<std::shared_ptr<const Mechanism>> all = mechanisms;
    all.push_back(std::make_shared<RegretNet>(n, m, NetworkConfig{}, 40 + n * m));
    const Tensor values = sample(DistributionSpec::uniform(n, m), 20, 41).values;
    const auto pairs = permutation_pairs(n, m, {});
    for (const auto& mech : all) {
      const auto sym = symmetrize(mech, 100, 1);
      worst_sym = std::max(worst_sym, equivariance_deviation(*sym, values, pairs));
    }
  }

  const auto net = std::make_shared<EquivariantNet>(NetworkConfig{}, 9);
  const auto sym = symmetrize(net, 100, 1);
  const Tensor values = sample(DistributionSpec::uniform(3, 3), 20, 42).values;
  const MechanismOutput a = evaluate(*net, values);
  const MechanismOutput b = evaluate(*sym, values);
  const double identity = std::max(max_abs_diff(a.allocation, b.allocation), max_abs_diff(a.payments, b.payments));
  return {worst_sym <= 1e-9 && identity <= 1e-9,
          "symmetrized deviation " + fmt("%.3g", worst_sym) + ", identity on equivariant " + fmt("%.3g", identity)};
}

std::vector<std::string> csv_without_column(const fs::path& path, const std::string& column) {
  std::ifstream is(path, std::ios::binary);
  std::vector<std::string> rows;
  std::string line;
  std::ptrdiff_t drop = -1;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (drop < 0) drop = std::find(cells.begin(), cells.end(), column) - cells.begin();
    if (drop < static_cast<std::ptrdiff_t>(cells.size())) cells.erase(cells.begin() + drop);
    std::string joined;
    for (const auto& c : cells) joined += c + ",";
    rows.push_back(joined);
  }
  return rows;
}

Outcome determinism(const fs::path& work) {
  const std::string name = "setting_II";
  const ExperimentConfig config = builtin_experiment(name);
  const auto a = run_train(config, work / "determinism_a");
  const auto b = run_train(config, work / "determinism_b");
  const bool same = csv_without_column(a.metrics_csv, "wall_time_s") == csv_without_column(b.metrics_csv, "wall_time_s");
  return {same, name + " metric CSVs " + (same ? "identical" : "differ") + " apart from wall_time_s"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string work = "acceptance_work";
  bool strict = false;
  app.add_option("--only", only, "Criteria to run (default: all)")->check(CLI::Range(1, 11));
  app.add_option("--work", work, "Directory for trained runs");
  app.add_flag("--strict", strict, "Exit non-zero when a criterion fails");
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(work);
  RunCache cache(work);
  const std::map<int, std::function<Outcome()>> criteria{
      {1, [&] { return reproduction(cache, "setting_I", 0.53, 0.58, 5e-3); }},
      {2, [&] { return reproduction(cache, "setting_IV", 0.16, 0.185, 5e-3); }},
      {3, [&] { return reproduction(cache, "setting_V", 0.82, 0.90, 1e-2); }},
      {4, [&] { return reproduction(cache, "setting_VI_1", 0.80, 0.92, 0.0); }},
      {5, exact_equivariance},
      {6, diagnostics},
      {7, [&] { return asymmetry(cache); }},
      {8, gradients},
      {9, [&] { return generalization(cache); }},
      {10, symmetrization},
      {11, [&] { return determinism(work); }},
  };
  if (only.empty()) {
    for (const auto& [id, fn] : criteria) only.push_back(id);
  }

  bool all_pass = true;
  std::ofstream report(fs::path(work) / "report.txt", std::ios::app);
  for (int id : only) {
    Outcome out;
    try {
      out = criteria.at(id)();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    all_pass = all_pass && out.pass;
    const std::string line =
        "criterion " + std::to_string(id) + ": " + (out.pass ? "PASS" : "FAIL") + " " + out.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    report << line << '\n';
  }
  return strict && !all_pass ? 1 : 0;
}
