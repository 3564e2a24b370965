#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "eqa/mechanism.hpp"
#include "eqa/permutations.hpp"
#include "eqa/training.hpp"
#include "eqa/valuations.hpp"

namespace eqa {

struct RegretEvalConfig {
  std::size_t steps = 300;      // R_test
  double step_size = 1e-3;
  std::size_t restarts = 100;   // N_init; restart 0 starts at the truthful bid
  std::size_t max_samples = 0;  // evaluate only the first max_samples profiles (0 = all)
  std::uint64_t seed = 0;       // restart draws

  void validate() const;
  friend bool operator==(const RegretEvalConfig&, const RegretEvalConfig&) = default;
};

struct RegretReport {
  std::vector<double> per_bidder;  // mean over samples
  double mean = 0.0;               // mean over bidders
  std::size_t samples = 0;
};

// Batch mean of the total payment at truthful bids.
double revenue(const Mechanism& mechanism, const Tensor& values);

// Per-sample total payment [L].
std::vector<double> sample_revenues(const Mechanism& mechanism, const Tensor& values);

// Per (sample, bidder): the best utility gain found by projected Adam ascent
// from N_init starts (truthful plus draws from the valuation distribution),
// clamped at 0; averaged over samples.
RegretReport test_regret(const Mechanism& mechanism, const SampleBatch& batch, const RegretEvalConfig& config);

struct SensitivityReport {
  std::vector<double> h;  // per-sample revenue range over permuted inputs
  PermutationMode mode = PermutationMode::kExhaustive;
  std::size_t permutations = 0;
  double max = 0.0;
  double median = 0.0;
  std::vector<double> bin_edges;  // 51 edges over [0, max]
  std::vector<std::size_t> histogram;  // 50 counts
};

SensitivityReport permutation_sensitivity(const Mechanism& mechanism, const Tensor& values,
                                          const PermutationOptions& options = {});

struct ExploitabilityReport {
  double r_opt = 0.0;
  double r_adv = 0.0;
  double loss_percent = 0.0;  // NaN when undefined
  bool defined = true;        // false when r_opt == 0
  PermutationMode mode = PermutationMode::kExhaustive;
  std::size_t permutations = 0;
};

ExploitabilityReport exploitability(const Mechanism& mechanism, const Tensor& values,
                                    const PermutationOptions& options = {});

// Group average over bidder and item relabelings:
// B -> mean over pairs of (P^-1 g(P B Q) Q^-1, P^-1 p(P B Q)).
// Exhaustive when n!*m! <= options.cap, otherwise options.samples pairs.
class SymmetrizedMechanism final : public Mechanism {
 public:
  SymmetrizedMechanism(std::shared_ptr<const Mechanism> inner, PermutationOptions options);

  MechanismVars forward(ad::Tape& tape, ad::Var bids) const override;
  std::string name() const override { return "symmetrized(" + inner_->name() + ")"; }

  // Pairs used at size (n, m).
  std::vector<PermutationPair> pairs(std::size_t n, std::size_t m) const;

 private:
  std::shared_ptr<const Mechanism> inner_;
  PermutationOptions options_;
};

std::shared_ptr<SymmetrizedMechanism> symmetrize(std::shared_ptr<const Mechanism> mechanism,
                                                 std::size_t num_perm_samples, std::uint64_t seed,
                                                 std::uint64_t cap = 5040);

// Max abs deviation from g(P B Q) = P g(B) Q and p(P B Q) = P p(B) over the
// given relabelings of the profiles in `values` [L, n, m].
double equivariance_deviation(const Mechanism& mechanism, const Tensor& values,
                              const std::vector<PermutationPair>& pairs);

struct CrossSizeResult {
  std::size_t bidders = 0;
  std::size_t items = 0;
  double revenue = 0.0;
  RegretReport regret;
};

// Revenue and test regret at a size other than the training size. Throws
// SizeBoundArchitecture for dense baselines.
CrossSizeResult cross_size_eval(const LearnedMechanism& mechanism, const SampleBatch& batch,
                                const RegretEvalConfig& config);

}  // namespace eqa
