#include "eqa/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "eqa/adam.hpp"
#include "eqa/permutations.hpp"
#include "eqa/rng.hpp"

namespace eqa {

void TrainConfig::validate() const {
  distribution.validate();
  if (samples == 0) throw std::invalid_argument("train: samples must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
  if (misreport_steps == 0) throw std::invalid_argument("train: misreport_steps must be >= 1");
  if (rho_period == 0 || lambda_period == 0) throw std::invalid_argument("train: rho_period and lambda_period must be >= 1");
  if (!(misreport_lr > 0.0) || !(learning_rate > 0.0) || !(rho_init > 0.0) || !(rho_increment > 0.0)) {
    throw std::invalid_argument("train: misreport_lr, learning_rate, rho_init and rho_increment must be > 0");
  }
  if (!lambda_init.empty() && lambda_init.size() != distribution.bidders) {
    throw std::invalid_argument("train: lambda_init needs one entry per bidder");
  }
  for (double l : lambda_init) {
    if (!std::isfinite(l)) throw std::invalid_argument("train: lambda_init must be finite");
  }
}

std::vector<double> TrainConfig::initial_lambda() const {
  return lambda_init.empty() ? std::vector<double>(distribution.bidders, 1.0) : lambda_init;
}

Tensor MisreportStore::gather(std::span<const std::size_t> samples) const {
  const std::size_t n = values_.dim(1);
  const std::size_t m = values_.dim(2);
  Tensor out(Shape{samples.size(), n, m});
  for (std::size_t b = 0; b < samples.size(); ++b) {
    if (samples[b] >= values_.dim(0)) throw std::out_of_range("MisreportStore::gather: sample index out of range");
    std::copy_n(values_.data().data() + samples[b] * n * m, n * m, out.data().data() + b * n * m);
  }
  return out;
}

void MisreportStore::scatter(std::span<const std::size_t> samples, const Tensor& misreports) {
  const std::size_t n = values_.dim(1);
  const std::size_t m = values_.dim(2);
  if (misreports.shape() != Shape{samples.size(), n, m}) {
    throw ShapeError("MisreportStore::scatter: got " + shape_to_string(misreports.shape()));
  }
  for (std::size_t b = 0; b < samples.size(); ++b) {
    if (samples[b] >= values_.dim(0)) throw std::out_of_range("MisreportStore::scatter: sample index out of range");
    std::copy_n(misreports.data().data() + b * n * m, n * m, values_.data().data() + samples[b] * n * m);
  }
}

namespace {

void require_batch(const Tensor& values, const Tensor& misreports) {
  if (values.rank() != 3) throw ShapeError("expected valuations [batch,n,m], got " + shape_to_string(values.shape()));
  if (misreports.shape() != values.shape()) {
    throw ShapeError("misreports " + shape_to_string(misreports.shape()) + " do not match valuations " +
                     shape_to_string(values.shape()));
  }
}

// Constant weights selecting the deviating bidder's row: W[b*n+i, i, j] =
// values[b, i, j] and mask[b*n+i, i] = 1, zero elsewhere.
void deviation_selectors(const Tensor& values, Tensor& weights, Tensor& mask) {
  const std::size_t B = values.dim(0), n = values.dim(1), m = values.dim(2);
  weights = Tensor(Shape{B * n, n, m});
  mask = Tensor(Shape{B * n, n});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = b * n + i;
      mask[k * n + i] = 1.0;
      for (std::size_t j = 0; j < m; ++j) weights[(k * n + i) * m + j] = values[(b * n + i) * m + j];
    }
  }
}

// Deviation utilities [B, n]; fills grad [B, n, m] with du_i/dv'_i if given.
Tensor deviation_utilities(const Mechanism& mechanism, const Tensor& values, const Tensor& misreports, Tensor* grad) {
  require_batch(values, misreports);
  const std::size_t B = values.dim(0), n = values.dim(1), m = values.dim(2);
  ad::Tape tape;
  ad::Var x = grad ? tape.variable(misreport_profiles(values, misreports))
                   : tape.constant(misreport_profiles(values, misreports));
  const MechanismVars out = mechanism.forward(tape, x);
  const Tensor& g = out.allocation.value();
  const Tensor& p = out.payments.value();
  Tensor u(Shape{B, n});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = b * n + i;
      double acc = -p[k * n + i];
      for (std::size_t j = 0; j < m; ++j) acc += g[(k * n + i) * m + j] * values[(b * n + i) * m + j];
      if (!std::isfinite(acc)) throw NonFiniteUtility("non-finite misreport utility");
      u[b * n + i] = acc;
    }
  }
  if (grad) {
    Tensor weights, mask;
    deviation_selectors(values, weights, mask);
    ad::Var objective =
        ad::sum_all(out.allocation * tape.constant(std::move(weights))) - ad::sum_all(out.payments * tape.constant(std::move(mask)));
    tape.backward(objective);
    const Tensor dx = tape.gradient(x);
    *grad = Tensor(Shape{B, n, m});
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = b * n + i;
        for (std::size_t j = 0; j < m; ++j) (*grad)[(b * n + i) * m + j] = dx[(k * n + i) * m + j];
      }
    }
  }
  return u;
}

}  // namespace

Tensor misreport_profiles(const Tensor& values, const Tensor& misreports) {
  require_batch(values, misreports);
  const std::size_t B = values.dim(0), n = values.dim(1), m = values.dim(2);
  Tensor out(Shape{B * n, n, m});
  for (std::size_t b = 0; b < B; ++b) {
    const double* v = values.data().data() + b * n * m;
    for (std::size_t i = 0; i < n; ++i) {
      double* dst = out.data().data() + (b * n + i) * n * m;
      std::copy_n(v, n * m, dst);
      std::copy_n(misreports.data().data() + (b * n + i) * m, m, dst + i * m);
    }
  }
  return out;
}

Tensor misreport_utilities(const Mechanism& mechanism, const Tensor& values, const Tensor& misreports) {
  return deviation_utilities(mechanism, values, misreports, nullptr);
}

Tensor truthful_utilities(const Mechanism& mechanism, const Tensor& values) {
  return deviation_utilities(mechanism, values, values, nullptr);
}

void misreport_ascent(const Mechanism& mechanism, const Tensor& values, Tensor& misreports,
                      const DistributionSpec& support, const AscentOptions& options, Tensor* best) {
  require_batch(values, misreports);
  if (support.items != values.dim(2)) throw ShapeError("misreport_ascent: support item count mismatch");
  if (!(options.step_size > 0.0)) throw std::invalid_argument("misreport_ascent: step size must be > 0");
  project_to_support(support, misreports.data());
  Tensor first_moment(misreports.shape());
  Tensor second_moment(misreports.shape());
  const AdamOptions adam{options.step_size, 0.9, 0.999, 1e-8};
  Tensor grad;
  for (std::size_t step = 0; step <= options.steps; ++step) {
    const bool last = step == options.steps;
    if (last && !best) break;
    const Tensor u = deviation_utilities(mechanism, values, misreports, last ? nullptr : &grad);
    if (best) {
      if (step == 0) {
        *best = u;
      } else {
        for (std::size_t k = 0; k < u.size(); ++k) (*best)[k] = std::max((*best)[k], u[k]);
      }
    }
    if (last) break;
    if (options.rule == AscentRule::kAdam) {
      for (double& d : grad.data()) d = -d;
      adam_step(misreports.data(), grad.data(), first_moment.data(), second_moment.data(), step + 1, adam);
    } else {
      for (std::size_t k = 0; k < grad.size(); ++k) misreports[k] += options.step_size * grad[k];
    }
    project_to_support(support, misreports.data());
  }
}

std::vector<double> empirical_regret(const Mechanism& mechanism, const Tensor& values, const Tensor& misreports) {
  const Tensor mis = misreport_utilities(mechanism, values, misreports);
  const Tensor truth = truthful_utilities(mechanism, values);
  const std::size_t B = values.dim(0), n = values.dim(1);
  std::vector<double> r(n, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < n; ++i) r[i] += std::max(0.0, mis[b * n + i] - truth[b * n + i]);
  }
  for (double& x : r) x /= static_cast<double>(B);
  return r;
}

double augmented_lagrangian(double revenue, std::span<const double> regrets, std::span<const double> lambda,
                            double rho) {
  if (regrets.size() != lambda.size()) throw std::invalid_argument("augmented_lagrangian: size mismatch");
  double weighted = 0.0, total = 0.0;
  for (std::size_t i = 0; i < regrets.size(); ++i) {
    weighted += lambda[i] * regrets[i];
    total += regrets[i];
  }
  return -revenue + weighted + 0.5 * rho * total * total;
}

LagrangianTerms lagrangian_terms(ad::Tape& tape, const ForwardFn& forward, const Tensor& values,
                                 const Tensor& misreports, std::span<const double> lambda, double rho) {
  require_batch(values, misreports);
  const std::size_t B = values.dim(0), n = values.dim(1), m = values.dim(2);
  if (lambda.size() != n) throw std::invalid_argument("lagrangian: lambda needs one entry per bidder");
  const double inv_b = 1.0 / static_cast<double>(B);

  ad::Var v = tape.constant(values);
  const MechanismVars truth = forward(v);
  ad::Var u_true = ad::reshape(ad::sum(truth.allocation * v, 2), Shape{B, n}) - truth.payments;  // [B,n]

  Tensor weights, mask;
  deviation_selectors(values, weights, mask);
  const MechanismVars dev = forward(tape.constant(misreport_profiles(values, misreports)));
  ad::Var gain = ad::sum(ad::sum(dev.allocation * tape.constant(std::move(weights)), 2), 1);  // [B*n,1,1]
  ad::Var paid = ad::sum(dev.payments * tape.constant(std::move(mask)), 1);                    // [B*n,1]
  ad::Var u_mis = ad::reshape(gain, Shape{B, n}) - ad::reshape(paid, Shape{B, n});

  ad::Var regrets = ad::mean(ad::relu(u_mis - u_true), 0);  // [1,n]
  ad::Var revenue = ad::scale(ad::sum_all(truth.payments), inv_b);
  ad::Var lam = tape.constant(Tensor(Shape{1, n}, std::vector<double>(lambda.begin(), lambda.end())));
  ad::Var total = ad::sum_all(regrets);
  ad::Var loss = ad::neg(revenue) + ad::sum_all(regrets * lam) + ad::scale(ad::square(total), 0.5 * rho);
  (void)m;
  return {loss, revenue, regrets};
}

double lagrangian_value(const Mechanism& mechanism, std::span<const double> lambda, double rho, const Tensor& values,
                        const Tensor& misreports) {
  ad::Tape tape;
  const auto terms = lagrangian_terms(
      tape, [&](ad::Var bids) { return mechanism.forward(tape, bids); }, values, misreports, lambda, rho);
  return terms.loss.value().item();
}

std::vector<Tensor> lagrangian_gradient(const LearnedMechanism& mechanism, std::span<const double> lambda, double rho,
                                        const Tensor& values, const Tensor& misreports) {
  ad::Tape tape;
  const auto params = bind_parameters(tape, mechanism.parameters(), true);
  const auto terms = lagrangian_terms(
      tape, [&](ad::Var bids) { return mechanism.forward_with(tape, bids, params); }, values, misreports, lambda, rho);
  tape.backward(terms.loss);
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(tape.gradient(p));
  return grads;
}

void update_multipliers(LagrangianState& state, std::span<const double> regrets, double rho) {
  if (regrets.size() != state.lambda.size()) throw std::invalid_argument("update_multipliers: size mismatch");
  for (std::size_t i = 0; i < regrets.size(); ++i) state.lambda[i] += rho * regrets[i];
}

double rho_schedule(const TrainConfig& config, std::uint64_t iteration) {
  return config.rho_init + config.rho_increment * static_cast<double>(iteration / config.rho_period);
}

TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  return train(config, sample(config.distribution, config.samples, derive_seed(config.seed, Stream::kTrainData)),
               on_epoch);
}

TrainResult train(const TrainConfig& config, const SampleBatch& data, const EpochCallback& on_epoch) {
  config.validate();
  if (data.bidders() != config.distribution.bidders || data.items() != config.distribution.items) {
    throw std::invalid_argument("train: data size does not match the distribution");
  }
  const std::size_t L = data.count();
  const std::size_t n = data.bidders();
  const std::size_t m = data.items();

  TrainResult result;
  result.mechanism = make_mechanism(config.architecture, n, m, config.network, config.seed);
  result.lagrangian.lambda = config.initial_lambda();
  result.lagrangian.rho = config.rho_init;
  result.lagrangian.iteration = 0;

  MisreportStore store(data.values);
  AdamState adam = AdamState::zeros_like(result.mechanism->parameters(), AdamOptions{config.learning_rate});
  const AscentOptions ascent{config.misreport_steps, config.misreport_lr, AscentRule::kAdam};

  std::unique_ptr<LearnedMechanism> last_good = result.mechanism->clone();
  LagrangianState last_good_state = result.lagrangian;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(L);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = make_stream(config.seed, Stream::kShuffle, {epoch});
    for (std::size_t i = L; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double revenue_sum = 0.0;
    std::vector<double> regret_sum(n, 0.0);
    std::size_t batches = 0;
    for (std::size_t first = 0; first < L; first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, L - first);
      const std::span<const std::size_t> idx(order.data() + first, count);
      Tensor values(Shape{count, n, m});
      for (std::size_t b = 0; b < count; ++b) {
        std::copy_n(data.values.data().data() + idx[b] * n * m, n * m, values.data().data() + b * n * m);
      }

      auto diverged = [&](const std::string& why) {
        return TrainingDiverged("training diverged at epoch " + std::to_string(epoch + 1) + ": " + why,
                                last_good->clone(), last_good_state, epoch);
      };

      Tensor misreports = store.gather(idx);
      try {
        misreport_ascent(*result.mechanism, values, misreports, config.distribution, ascent);
      } catch (const NonFiniteUtility& e) {
        throw diverged(e.what());
      }
      store.scatter(idx, misreports);

      const std::uint64_t t = result.lagrangian.iteration;
      const double rho = rho_schedule(config, t);
      result.lagrangian.rho = rho;
      ad::Tape tape;
      const auto params = bind_parameters(tape, result.mechanism->parameters(), true);
      const auto terms = lagrangian_terms(
          tape, [&](ad::Var bids) { return result.mechanism->forward_with(tape, bids, params); }, values, misreports,
          result.lagrangian.lambda, rho);
      if (!std::isfinite(terms.loss.value().item())) throw diverged("non-finite loss");
      tape.backward(terms.loss);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (const auto& p : params) grads.push_back(tape.gradient(p));
      try {
        adam_update(result.mechanism->parameters(), grads, adam);
      } catch (const NonFiniteGradient& e) {
        throw diverged(e.what());
      }

      const Tensor& rg = terms.regrets.value();
      revenue_sum += terms.revenue.value().item();
      for (std::size_t i = 0; i < n; ++i) regret_sum[i] += rg[i];
      ++batches;

      if ((t + 1) % config.lambda_period == 0) {
        update_multipliers(result.lagrangian, rg.data(), rho);
      }
      result.lagrangian.iteration = t + 1;
      result.lagrangian.rho = rho_schedule(config, t + 1);
    }

    MetricsRecord record;
    record.epoch = epoch + 1;
    record.mean_revenue = revenue_sum / static_cast<double>(batches);
    record.regret.resize(n);
    for (std::size_t i = 0; i < n; ++i) record.regret[i] = regret_sum[i] / static_cast<double>(batches);
    record.lambda = result.lagrangian.lambda;
    record.rho = result.lagrangian.rho;
    record.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.metrics.push_back(record);

    last_good = result.mechanism->clone();
    last_good_state = result.lagrangian;
    if (on_epoch) on_epoch(record, *result.mechanism, result.lagrangian);
  }
  return result;
}

}  // namespace eqa
