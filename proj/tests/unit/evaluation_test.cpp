#include <gtest/gtest.h>

#include <cmath>

#include "eqa/evaluation.hpp"
#include "eqa/networks.hpp"
#include "support/toy_mechanisms.hpp"

namespace eqa {
namespace {

using testing::FirstPrice;
using testing::PayFirstBid;
using testing::SecondPriceReserve;

SampleBatch batch_of(std::size_t n, std::size_t m, std::vector<double> values) {
  const std::size_t L = values.size() / (n * m);
  return SampleBatch{DistributionSpec::uniform(n, m), 0, Tensor(Shape{L, n, m}, std::move(values))};
}

// Pays a fixed amount per bidder regardless of bids.
class FixedPayments final : public Mechanism {
 public:
  explicit FixedPayments(std::vector<double> p) : p_(std::move(p)) {}
  std::string name() const override { return "fixed"; }
  MechanismVars forward(ad::Tape& tape, ad::Var bids) const override {
    const Shape s = bids.shape();
    Tensor p(Shape{s[0], s[1]});
    for (std::size_t b = 0; b < s[0]; ++b)
      for (std::size_t i = 0; i < s[1]; ++i) p[b * s[1] + i] = p_[i];
    return {tape.constant(Tensor(s)), tape.constant(std::move(p))};
  }

 private:
  std::vector<double> p_;
};

TEST(Revenue, Examples) {
  const EquivariantNet net(NetworkConfig{}, 1);
  EXPECT_EQ(revenue(net, Tensor(Shape{5, 2, 3})), 0.0);
  EXPECT_NEAR(revenue(FixedPayments({0.2, 0.3}), Tensor(Shape{1, 2, 1}, 0.5)), 0.5, 1e-15);
}

TEST(Revenue, MatchesTrainingLoopRevenue) {
  const EquivariantNet net(NetworkConfig{}, 2);
  const Tensor values = sample(DistributionSpec::uniform(2, 2), 16, 3).values;
  ad::Tape tape;
  const auto terms = lagrangian_terms(
      tape, [&](ad::Var b) { return net.forward(tape, b); }, values, values, std::vector<double>{1, 1}, 1.0);
  EXPECT_NEAR(revenue(net, values), terms.revenue.value().item(), 1e-12);
}

TEST(TestRegret, SecondPriceWithReserveIsTruthful) {
  const SecondPriceReserve mech(0.3);
  const SampleBatch batch = sample(DistributionSpec::uniform(3, 1), 40, 4);
  RegretEvalConfig cfg;
  cfg.steps = 20;
  cfg.restarts = 10;
  cfg.seed = 5;
  const RegretReport r = test_regret(mech, batch, cfg);
  EXPECT_LE(r.mean, 1e-6);
  for (double x : r.per_bidder) EXPECT_LE(x, 1e-6);
}

TEST(TestRegret, FirstPriceMatchesGridOracle) {
  const SampleBatch batch = batch_of(2, 1, {0.8, 0.3, 0.6, 0.9});
  // Oracle: best utility over a fine grid of deviations using the closed form.
  std::vector<double> oracle(2, 0.0);
  for (std::size_t l = 0; l < 2; ++l) {
    const std::vector<double> bids{batch.values[l * 2], batch.values[l * 2 + 1]};
    for (std::size_t i = 0; i < 2; ++i) {
      const double truthful = FirstPrice::utility(bids, i, bids[i], bids[i]);
      double best = truthful;
      for (int k = 0; k <= 10000; ++k) best = std::max(best, FirstPrice::utility(bids, i, bids[i], k * 1e-4));
      oracle[i] += (best - truthful) / 2.0;
    }
  }
  EXPECT_NEAR(oracle[0], 0.25, 1e-3);
  EXPECT_NEAR(oracle[1], 0.15, 1e-3);
  RegretEvalConfig cfg;
  cfg.steps = 300;
  cfg.restarts = 30;
  cfg.seed = 6;
  const RegretReport r = test_regret(FirstPrice(), batch, cfg);
  EXPECT_GT(r.mean, 0.0);
  EXPECT_NEAR(r.per_bidder[0], oracle[0], 0.01);
  EXPECT_NEAR(r.per_bidder[1], oracle[1], 0.01);
  EXPECT_NEAR(r.mean, (r.per_bidder[0] + r.per_bidder[1]) / 2.0, 1e-15);
}

TEST(TestRegret, MonotoneInRestartsAndSteps) {
  const EquivariantNet net(NetworkConfig{}, 7);
  const SampleBatch batch = sample(DistributionSpec::uniform(2, 2), 6, 8);
  RegretEvalConfig cfg;
  cfg.seed = 9;
  cfg.steps = 15;
  double previous = -1.0;
  for (std::size_t k : {1, 3, 8}) {
    cfg.restarts = k;
    const RegretReport r = test_regret(net, batch, cfg);
    EXPECT_GE(r.mean, previous);
    previous = r.mean;
  }
  previous = -1.0;
  cfg.restarts = 3;
  for (std::size_t steps : {1, 5, 20}) {
    cfg.steps = steps;
    const RegretReport r = test_regret(net, batch, cfg);
    EXPECT_GE(r.mean, previous);
    previous = r.mean;
  }
}

TEST(TestRegret, MaxSamplesLimitsTheBatch) {
  const SecondPriceReserve mech(0.0);
  RegretEvalConfig cfg;
  cfg.steps = 2;
  cfg.restarts = 2;
  cfg.max_samples = 7;
  EXPECT_EQ(test_regret(mech, sample(DistributionSpec::uniform(2, 1), 20, 1), cfg).samples, 7u);
  cfg.restarts = 0;
  EXPECT_THROW(test_regret(mech, sample(DistributionSpec::uniform(2, 1), 20, 1), cfg), std::invalid_argument);
}

TEST(Sensitivity, EquivariantNetIsInsensitive) {
  const EquivariantNet net(NetworkConfig{}, 10);
  const Tensor values = sample(DistributionSpec::uniform(2, 3), 30, 11).values;
  const SensitivityReport r = permutation_sensitivity(net, values);
  EXPECT_EQ(r.permutations, 12u);
  EXPECT_EQ(r.mode, PermutationMode::kExhaustive);
  EXPECT_LE(r.max, 1e-9);
  EXPECT_EQ(r.histogram.size(), 50u);
  EXPECT_EQ(r.bin_edges.size(), 51u);
}

TEST(Sensitivity, PayFirstBidToy) {
  const Tensor bids(Shape{1, 2, 1}, std::vector<double>{1.0, 0.0});
  const SensitivityReport r = permutation_sensitivity(PayFirstBid(), bids);
  EXPECT_EQ(r.permutations, 2u);
  EXPECT_DOUBLE_EQ(r.h[0], 1.0);
  EXPECT_EQ(r.histogram.back(), 1u);
}

TEST(Sensitivity, CapEnforcedInExhaustiveMode) {
  const EquivariantNet net(NetworkConfig{}, 12);
  const Tensor values = sample(DistributionSpec::uniform(4, 5), 2, 13).values;
  PermutationOptions o;
  o.cap = 1000;
  EXPECT_THROW(permutation_sensitivity(net, values, o), PermutationCapExceeded);
  o.mode = PermutationMode::kSampled;
  o.samples = 100;
  const SensitivityReport r = permutation_sensitivity(net, values, o);
  EXPECT_EQ(r.mode, PermutationMode::kSampled);
  EXPECT_EQ(r.permutations, 100u);
  EXPECT_LE(r.max, 1e-9);
}

TEST(Exploitability, PayFirstBidToy) {
  const Tensor bids(Shape{1, 2, 1}, std::vector<double>{1.0, 0.0});
  const ExploitabilityReport r = exploitability(PayFirstBid(), bids);
  EXPECT_DOUBLE_EQ(r.r_opt, 1.0);
  EXPECT_DOUBLE_EQ(r.r_adv, 0.0);
  EXPECT_DOUBLE_EQ(r.loss_percent, 100.0);
  EXPECT_TRUE(r.defined);
}

TEST(Exploitability, EquivariantNetLosesNothing) {
  const EquivariantNet net(NetworkConfig{}, 14);
  const ExploitabilityReport r = exploitability(net, sample(DistributionSpec::uniform(3, 2), 25, 15).values);
  EXPECT_LE(r.r_adv, r.r_opt + 1e-9);
  EXPECT_LE(std::abs(r.loss_percent), 1e-7);
}

TEST(Exploitability, UndefinedAtZeroRevenue) {
  const ExploitabilityReport r = exploitability(PayFirstBid(), Tensor(Shape{3, 2, 1}));
  EXPECT_FALSE(r.defined);
  EXPECT_TRUE(std::isnan(r.loss_percent));
}

TEST(Symmetrize, PayFirstBidToyByHand) {
  const auto sym = symmetrize(std::make_shared<PayFirstBid>(), 100, 1);
  const MechanismOutput out = evaluate(*sym, Tensor(Shape{2, 1}, std::vector<double>{1.0, 0.0}));
  EXPECT_DOUBLE_EQ(out.payments[0], 0.5);
  EXPECT_DOUBLE_EQ(out.payments[1], 0.0);
  EXPECT_DOUBLE_EQ(out.allocation[0], 0.5);
  EXPECT_DOUBLE_EQ(out.allocation[1], 0.5);
}

TEST(Symmetrize, ExhaustiveResultIsEquivariant) {
  const auto regretnet = std::make_shared<RegretNet>(2, 3, NetworkConfig{}, 16);
  const auto sym = symmetrize(regretnet, 100, 2);
  const Tensor values = sample(DistributionSpec::uniform(2, 3), 5, 17).values;
  const auto pairs = permutation_pairs(2, 3, PermutationOptions{});
  EXPECT_GT(equivariance_deviation(*regretnet, values, pairs), 1e-3);
  EXPECT_LE(equivariance_deviation(*sym, values, pairs), 1e-10);
}

TEST(Symmetrize, EquivariantInputIsUnchanged) {
  const auto net = std::make_shared<EquivariantNet>(NetworkConfig{}, 18);
  const auto sym = symmetrize(net, 100, 3);
  const Tensor values = sample(DistributionSpec::uniform(3, 2), 5, 19).values;
  const MechanismOutput a = evaluate(*net, values), b = evaluate(*sym, values);
  EXPECT_LE(max_abs_diff(a.allocation, b.allocation), 1e-9);
  EXPECT_LE(max_abs_diff(a.payments, b.payments), 1e-9);
}

TEST(Symmetrize, SampledBeyondCap) {
  const auto net = std::make_shared<EquivariantNet>(NetworkConfig{1, 2, 2, 100}, 20);
  const auto sym = symmetrize(net, 10, 4, 100);
  EXPECT_EQ(sym->pairs(4, 5).size(), 10u);
  EXPECT_EQ(sym->pairs(2, 2).size(), 4u);
}

TEST(CrossSize, BaselineIsRejected) {
  const RegretNet net(1, 5, NetworkConfig{}, 1);
  try {
    cross_size_eval(net, sample(DistributionSpec::uniform(1, 2), 5, 1), RegretEvalConfig{});
    FAIL() << "expected SizeBoundArchitecture";
  } catch (const SizeBoundArchitecture& e) {
    EXPECT_NE(std::string(e.what()).find("size-bound architecture"), std::string::npos);
  }
}

TEST(CrossSize, EquivariantRunsAtOtherSizes) {
  const EquivariantNet net(NetworkConfig{}, 21);
  RegretEvalConfig cfg;
  cfg.steps = 5;
  cfg.restarts = 2;
  const SampleBatch same = sample(DistributionSpec::uniform(1, 5), 20, 22);
  const CrossSizeResult r = cross_size_eval(net, same, cfg);
  EXPECT_EQ(r.revenue, revenue(net, same.values));
  EXPECT_EQ(r.regret.mean, test_regret(net, same, cfg).mean);
  const SampleBatch bigger = sample(DistributionSpec::uniform(2, 6), 20, 23);
  const CrossSizeResult g = cross_size_eval(net, bigger, cfg);
  EXPECT_TRUE(std::isfinite(g.revenue));
  EXPECT_TRUE(std::isfinite(g.regret.mean));
}

}  // namespace
}  // namespace eqa
