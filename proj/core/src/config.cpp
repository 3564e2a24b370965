#include "eqa/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "eqa/rng.hpp"

namespace eqa {

using nlohmann::json;

namespace {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

std::size_t count_of(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("config: " + where + "." + key + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

double number_of(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError("config: " + where + "." + key + " must be a number");
  return v.get<double>();
}

std::string string_of(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError("config: " + where + "." + key + " must be a string");
  return v.get<std::string>();
}

template <class T, class F>
void maybe(const json& j, const char* key, T& field, F&& read) {
  if (j.contains(key)) field = read(j, key);
}

SizeGrid grid_from_json(const json& g) {
  if (g.is_string()) return parse_grid(g.get<std::string>());
  if (!g.is_array()) throw ConfigError("config: grid must be a string or an array of [n, m] pairs");
  SizeGrid out;
  for (const json& e : g) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer() ||
        e[0].get<std::int64_t>() < 1 || e[1].get<std::int64_t>() < 1) {
      throw ConfigError("config: grid entries must be [n, m] with positive integers");
    }
    out.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ExperimentConfig base(const std::string& name, DistributionSpec dist) {
  ExperimentConfig c;
  c.name = name;
  c.distribution = std::move(dist);
  c.train.epochs = 80;
  c.train.rho_increment = 5.0;
  c.eval.steps = 300;
  c.eval.step_size = 1e-3;
  c.eval.restarts = 10;
  c.eval.max_samples = 500;
  return c;
}

ExperimentConfig reduced_regretnet(const std::string& name, std::size_t n, std::size_t m) {
  ExperimentConfig c = base(name, DistributionSpec::uniform(n, m));
  c.train.architecture = Architecture::kRegretNet;
  c.train.samples = 2000;
  c.train.batch_size = 100;
  c.train.epochs = 5;
  c.train.misreport_steps = 10;
  c.test_samples = 1000;
  c.eval.restarts = 2;
  c.eval.steps = 50;
  c.eval.max_samples = 100;
  c.diagnose.mode = PermutationMode::kSampled;
  c.diagnose.profiles = 500;
  return c;
}

const std::map<std::string, std::function<ExperimentConfig()>>& builtins() {
  static const std::map<std::string, std::function<ExperimentConfig()>> table = [] {
    std::map<std::string, std::function<ExperimentConfig()>> t;
    t["setting_I"] = [] { return base("setting_I", DistributionSpec::uniform(1, 2)); };
    t["setting_I_regretnet"] = [] {
      ExperimentConfig c = base("setting_I_regretnet", DistributionSpec::uniform(1, 2));
      c.train.architecture = Architecture::kRegretNet;
      return c;
    };
    t["setting_IV"] = [] { return base("setting_IV", DistributionSpec::heavy_tail(1)); };
    t["setting_V"] = [] { return base("setting_V", DistributionSpec::uniform(2, 2)); };
    for (const char* l2 : {"0.01", "0.1", "1", "10"}) {
      const std::string name = std::string("setting_VI_") + l2;
      const double scale = std::stod(l2);
      t[name] = [name, scale] { return base(name, DistributionSpec::exponential(2, {1.0, scale})); };
    }
    t["alpha"] = [] {
      ExperimentConfig c = base("alpha", DistributionSpec::uniform(1, 5));
      for (std::size_t m = 2; m <= 10; ++m) c.grid.emplace_back(1, m);
      return c;
    };
    t["beta"] = [] {
      ExperimentConfig c = base("beta", DistributionSpec::uniform(2, 3));
      for (std::size_t m = 2; m <= 6; ++m) c.grid.emplace_back(2, m);
      return c;
    };
    t["setting_II"] = [] { return reduced_regretnet("setting_II", 4, 5); };
    for (std::size_t n = 2; n <= 6; ++n) {
      const std::string name = "setting_III_" + std::to_string(n);
      t[name] = [name, n] { return reduced_regretnet(name, n, 10); };
    }
    return t;
  }();
  return table;
}

}  // namespace

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t = train;
  t.distribution = distribution;
  t.seed = seed;
  t.rho_period = std::max<std::size_t>(1, rho_period_epochs * t.iterations_per_epoch());
  return t;
}

std::uint64_t ExperimentConfig::test_seed() const { return derive_seed(seed, Stream::kTestData); }

RegretEvalConfig ExperimentConfig::eval_config() const {
  RegretEvalConfig e = eval;
  e.seed = derive_seed(seed, Stream::kRestarts);
  return e;
}

PermutationOptions ExperimentConfig::permutation_options() const {
  PermutationOptions o;
  o.mode = diagnose.mode;
  o.cap = diagnose.cap;
  o.samples = diagnose.permutation_samples;
  o.seed = derive_seed(seed, Stream::kPermutations);
  return o;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("config: name must not be empty");
  if (rho_period_epochs == 0) throw ConfigError("config: train.rho_period_epochs must be >= 1");
  if (test_samples == 0) throw ConfigError("config: eval.test_samples must be >= 1");
  if (diagnose.profiles == 0) throw ConfigError("config: diagnose.profiles must be >= 1");
  if (diagnose.mode == PermutationMode::kSampled && diagnose.permutation_samples < 100) {
    throw ConfigError("config: sampled permutation mode needs at least 100 permutation samples");
  }
  train_config().validate();
  eval.validate();
  for (const auto& [n, m] : grid) {
    if (n == 0 || m == 0) throw ConfigError("config: grid sizes must be positive");
    distribution.resized(n, m);
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["distribution"] = {{"kind", to_string(c.distribution.kind)},
                       {"bidders", c.distribution.bidders},
                       {"items", c.distribution.items},
                       {"scales", c.distribution.scales}};
  const TrainConfig& t = c.train;
  j["train"] = {{"samples", t.samples},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"misreport_steps", t.misreport_steps},
                {"misreport_lr", t.misreport_lr},
                {"learning_rate", t.learning_rate},
                {"rho_init", t.rho_init},
                {"rho_increment", t.rho_increment},
                {"rho_period_epochs", c.rho_period_epochs},
                {"lambda_period", t.lambda_period},
                {"lambda_init", t.lambda_init.empty() ? json(1.0) : json(t.lambda_init)},
                {"architecture", to_string(t.architecture)},
                {"network",
                 {{"hidden_layers", t.network.hidden_layers},
                  {"channels", t.network.channels},
                  {"baseline_hidden_layers", t.network.baseline_hidden_layers},
                  {"baseline_width", t.network.baseline_width}}}};
  j["eval"] = {{"test_samples", c.test_samples},
               {"steps", c.eval.steps},
               {"step_size", c.eval.step_size},
               {"restarts", c.eval.restarts},
               {"max_samples", c.eval.max_samples}};
  j["diagnose"] = {{"mode", to_string(c.diagnose.mode)},
                   {"cap", c.diagnose.cap},
                   {"permutation_samples", c.diagnose.permutation_samples},
                   {"profiles", c.diagnose.profiles}};
  j["grid"] = format_grid(c.grid);
  return j;
}

ExperimentConfig experiment_from_json(const json& j) {
  check_keys(j, "config", {"name", "seed", "output_dir", "distribution", "train", "eval", "diagnose", "grid"});
  ExperimentConfig c;
  c.name = string_of(j, "name", "config");
  maybe(j, "seed", c.seed, [](const json& o, const char* k) { return count_of(o, k, "config"); });
  maybe(j, "output_dir", c.output_dir, [](const json& o, const char* k) { return string_of(o, k, "config"); });

  if (j.contains("distribution")) {
    const json& d = j.at("distribution");
    check_keys(d, "distribution", {"kind", "bidders", "items", "scales"});
    DistributionSpec& s = c.distribution;
    if (d.contains("kind")) s.kind = distribution_kind_from_string(string_of(d, "kind", "distribution"));
    maybe(d, "bidders", s.bidders, [](const json& o, const char* k) { return count_of(o, k, "distribution"); });
    s.items = s.kind == DistributionKind::kHeavyTail ? 2 : s.items;
    maybe(d, "items", s.items, [](const json& o, const char* k) { return count_of(o, k, "distribution"); });
    if (d.contains("scales")) {
      const json& sc = d.at("scales");
      if (!sc.is_array()) throw ConfigError("config: distribution.scales must be an array");
      s.scales.clear();
      for (const json& x : sc) {
        if (!x.is_number()) throw ConfigError("config: distribution.scales entries must be numbers");
        s.scales.push_back(x.get<double>());
      }
    }
  }

  if (j.contains("train")) {
    const json& tj = j.at("train");
    const std::string w = "train";
    check_keys(tj, w,
               {"samples", "batch_size", "epochs", "misreport_steps", "misreport_lr", "learning_rate", "rho_init",
                "rho_increment", "rho_period_epochs", "lambda_period", "lambda_init", "architecture", "network"});
    TrainConfig& t = c.train;
    auto cnt = [&w](const json& o, const char* k) { return count_of(o, k, w); };
    auto num = [&w](const json& o, const char* k) { return number_of(o, k, w); };
    maybe(tj, "samples", t.samples, cnt);
    maybe(tj, "batch_size", t.batch_size, cnt);
    maybe(tj, "epochs", t.epochs, cnt);
    maybe(tj, "misreport_steps", t.misreport_steps, cnt);
    maybe(tj, "misreport_lr", t.misreport_lr, num);
    maybe(tj, "learning_rate", t.learning_rate, num);
    maybe(tj, "rho_init", t.rho_init, num);
    maybe(tj, "rho_increment", t.rho_increment, num);
    maybe(tj, "rho_period_epochs", c.rho_period_epochs, cnt);
    maybe(tj, "lambda_period", t.lambda_period, cnt);
    if (tj.contains("lambda_init")) {
      const json& l = tj.at("lambda_init");
      t.lambda_init.clear();
      if (l.is_number()) {
        if (l.get<double>() != 1.0) t.lambda_init.assign(c.distribution.bidders, l.get<double>());
      } else if (l.is_array()) {
        for (const json& x : l) {
          if (!x.is_number()) throw ConfigError("config: train.lambda_init entries must be numbers");
          t.lambda_init.push_back(x.get<double>());
        }
      } else {
        throw ConfigError("config: train.lambda_init must be a number or an array");
      }
    }
    if (tj.contains("architecture")) t.architecture = architecture_from_string(string_of(tj, "architecture", w));
    if (tj.contains("network")) {
      const json& nj = tj.at("network");
      check_keys(nj, "train.network", {"hidden_layers", "channels", "baseline_hidden_layers", "baseline_width"});
      auto ncnt = [](const json& o, const char* k) { return count_of(o, k, "train.network"); };
      maybe(nj, "hidden_layers", t.network.hidden_layers, ncnt);
      maybe(nj, "channels", t.network.channels, ncnt);
      maybe(nj, "baseline_hidden_layers", t.network.baseline_hidden_layers, ncnt);
      maybe(nj, "baseline_width", t.network.baseline_width, ncnt);
    }
  }

  if (j.contains("eval")) {
    const json& ej = j.at("eval");
    check_keys(ej, "eval", {"test_samples", "steps", "step_size", "restarts", "max_samples"});
    auto cnt = [](const json& o, const char* k) { return count_of(o, k, "eval"); };
    maybe(ej, "test_samples", c.test_samples, cnt);
    maybe(ej, "steps", c.eval.steps, cnt);
    maybe(ej, "step_size", c.eval.step_size, [](const json& o, const char* k) { return number_of(o, k, "eval"); });
    maybe(ej, "restarts", c.eval.restarts, cnt);
    maybe(ej, "max_samples", c.eval.max_samples, cnt);
  }

  if (j.contains("diagnose")) {
    const json& dj = j.at("diagnose");
    check_keys(dj, "diagnose", {"mode", "cap", "permutation_samples", "profiles"});
    auto cnt = [](const json& o, const char* k) { return count_of(o, k, "diagnose"); };
    if (dj.contains("mode")) c.diagnose.mode = permutation_mode_from_string(string_of(dj, "mode", "diagnose"));
    maybe(dj, "cap", c.diagnose.cap, cnt);
    maybe(dj, "permutation_samples", c.diagnose.permutation_samples, cnt);
    maybe(dj, "profiles", c.diagnose.profiles, cnt);
  }

  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
  c.validate();
  return c;
}

std::vector<std::string> builtin_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : builtins()) names.push_back(name);
  return names;
}

bool is_builtin(const std::string& name) { return builtins().count(name) != 0; }

ExperimentConfig builtin_experiment(const std::string& name) {
  const auto it = builtins().find(name);
  if (it == builtins().end()) throw ConfigError("unknown builtin config: " + name);
  ExperimentConfig c = it->second();
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::string& name_or_path) {
  if (is_builtin(name_or_path)) return builtin_experiment(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("config: '" + name_or_path + "' is neither a builtin name nor a readable file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: cannot parse " + name_or_path + ": " + e.what());
  }
  return experiment_from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("seed");
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

SizeGrid parse_grid(const std::string& text) {
  SizeGrid grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char ch) { return std::isspace(ch); }),
               item.end());
    if (item.empty()) continue;
    std::size_t n = 0, m = 0;
    char tail = 0;
    if (std::sscanf(item.c_str(), "%zux%zu%c", &n, &m, &tail) != 2 || n == 0 || m == 0) {
      throw ConfigError("grid: cannot parse '" + item + "' (expected NxM with positive integers)");
    }
    grid.emplace_back(n, m);
  }
  return grid;
}

std::string format_grid(const SizeGrid& grid) {
  std::string out;
  for (const auto& [n, m] : grid) {
    if (!out.empty()) out += ',';
    out += std::to_string(n) + "x" + std::to_string(m);
  }
  return out;
}

}  // namespace eqa
