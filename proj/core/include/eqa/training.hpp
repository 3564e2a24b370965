#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "eqa/autodiff.hpp"
#include "eqa/checkpoint.hpp"
#include "eqa/mechanism.hpp"
#include "eqa/networks.hpp"
#include "eqa/valuations.hpp"

namespace eqa {

struct TrainConfig {
  std::size_t samples = 5000;         // L
  std::size_t batch_size = 50;        // B
  std::size_t epochs = 50;            // T, passes over the data
  std::size_t misreport_steps = 25;   // R
  double misreport_lr = 1e-3;         // gamma
  double learning_rate = 1e-3;        // eta
  double rho_init = 1.0;
  double rho_increment = 1.0;         // c
  std::size_t rho_period = 200;       // T_rho, in minibatch iterations
  std::size_t lambda_period = 100;    // T_lambda, in minibatch iterations
  std::vector<double> lambda_init;    // empty means 1.0 per bidder
  std::uint64_t seed = 1;
  Architecture architecture = Architecture::kEquivariant;
  NetworkConfig network;
  DistributionSpec distribution;

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;
  std::size_t iterations_per_epoch() const { return batch_size == 0 ? 0 : (samples + batch_size - 1) / batch_size; }
  std::vector<double> initial_lambda() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// One misreport row per (sample, bidder): values[l, i, :] is bidder i's
// current misreport for sample l.
class MisreportStore {
 public:
  MisreportStore() = default;
  // Starts at the truthful values.
  explicit MisreportStore(const Tensor& truthful) : values_(truthful) {}

  const Tensor& values() const noexcept { return values_; }
  Tensor gather(std::span<const std::size_t> samples) const;
  void scatter(std::span<const std::size_t> samples, const Tensor& misreports);

 private:
  Tensor values_;  // [L, n, m]
};

enum class AscentRule { kAdam, kGradient };

struct AscentOptions {
  std::size_t steps = 25;
  double step_size = 1e-3;
  AscentRule rule = AscentRule::kAdam;
};

class NonFiniteUtility : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Profiles [B*n, n, m] where profile b*n+i equals values[b] with row i
// replaced by misreports[b, i].
Tensor misreport_profiles(const Tensor& values, const Tensor& misreports);

// u_i of each bidder when only that bidder deviates to its misreport row.
// Returns [B, n].
Tensor misreport_utilities(const Mechanism& mechanism, const Tensor& values, const Tensor& misreports);

// Truthful utilities [B, n].
Tensor truthful_utilities(const Mechanism& mechanism, const Tensor& values);

// Projected ascent on every bidder's misreport simultaneously; misreports
// [B, n, m] are updated in place and stay inside the support. When `best`
// is given it receives, per (sample, bidder), the largest utility seen at
// any visited point including the start and the final point.
void misreport_ascent(const Mechanism& mechanism, const Tensor& values, Tensor& misreports,
                      const DistributionSpec& support, const AscentOptions& options, Tensor* best = nullptr);

// Mean over the batch of max(0, u(misreport) - u(truthful)), per bidder.
std::vector<double> empirical_regret(const Mechanism& mechanism, const Tensor& values, const Tensor& misreports);

// -revenue + sum_i lambda_i r_i + rho/2 (sum_i r_i)^2
double augmented_lagrangian(double revenue, std::span<const double> regrets, std::span<const double> lambda,
                            double rho);

struct LagrangianTerms {
  ad::Var loss;     // scalar
  ad::Var revenue;  // scalar, batch mean of total payment
  ad::Var regrets;  // [1, n]
};

using ForwardFn = std::function<MechanismVars(ad::Var bids)>;

// Builds the Lagrangian on the tape. Misreports enter as constants.
LagrangianTerms lagrangian_terms(ad::Tape& tape, const ForwardFn& forward, const Tensor& values,
                                 const Tensor& misreports, std::span<const double> lambda, double rho);

double lagrangian_value(const Mechanism& mechanism, std::span<const double> lambda, double rho, const Tensor& values,
                        const Tensor& misreports);

// Gradient of lagrangian_value with respect to the mechanism's parameters.
std::vector<Tensor> lagrangian_gradient(const LearnedMechanism& mechanism, std::span<const double> lambda, double rho,
                                        const Tensor& values, const Tensor& misreports);

struct MetricsRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_revenue = 0.0;
  std::vector<double> regret;
  std::vector<double> lambda;
  double rho = 0.0;
  double wall_time_s = 0.0;
};

struct TrainResult {
  std::unique_ptr<LearnedMechanism> mechanism;
  LagrangianState lagrangian;
  std::vector<MetricsRecord> metrics;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::unique_ptr<LearnedMechanism> last_good, LagrangianState state,
                   std::size_t epoch)
      : std::runtime_error(what), last_good_(std::move(last_good)), state_(std::move(state)), epoch_(epoch) {}

  const std::shared_ptr<LearnedMechanism>& last_good() const noexcept { return last_good_; }
  const LagrangianState& state() const noexcept { return state_; }
  std::size_t completed_epochs() const noexcept { return epoch_; }

 private:
  std::shared_ptr<LearnedMechanism> last_good_;
  LagrangianState state_;
  std::size_t epoch_;
};

using EpochCallback = std::function<void(const MetricsRecord&, const LearnedMechanism&, const LagrangianState&)>;

// lambda_i += rho * regret_i
void update_multipliers(LagrangianState& state, std::span<const double> regrets, double rho);

// rho_t = rho_0 + c * floor(t / T_rho)
double rho_schedule(const TrainConfig& config, std::uint64_t iteration);

// Samples the training set from config.seed.
TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch = {});
// Trains on a pinned data set.
TrainResult train(const TrainConfig& config, const SampleBatch& data, const EpochCallback& on_epoch = {});

}  // namespace eqa
