#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>

#include "eqa/layers.hpp"
#include "eqa/mechanism.hpp"

namespace eqa {

struct NetworkConfig {
  // Exchangeable heads: hidden tanh layers and channels per hidden layer.
  std::size_t hidden_layers = 3;
  std::size_t channels = 25;
  // Dense baseline trunks.
  std::size_t baseline_hidden_layers = 2;
  std::size_t baseline_width = 100;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// Three exchangeable heads:
//   q-head: mean over bidders then sigmoid -> probability item j is sold
//   h-head: softmax over bidders -> who gets item j given it is sold
//   payment head: mean over items then sigmoid -> fraction of reported
//   allocated value each bidder pays
// The parameter count does not depend on (n, m).
class EquivariantNet final : public LearnedMechanism {
 public:
  enum class Head { kSale = 0, kWinner = 1, kPaymentFraction = 2 };

  EquivariantNet(const NetworkConfig& config, std::uint64_t seed);
  // Adopts a parameter set; names and shapes must match the config.
  EquivariantNet(const NetworkConfig& config, ParameterSet params);

  Architecture architecture() const override { return Architecture::kEquivariant; }
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }
  std::unique_ptr<LearnedMechanism> clone() const override;
  std::string name() const override { return "equivariant"; }
  const NetworkConfig& config() const noexcept { return config_; }

  MechanismVars forward_with(ad::Tape& tape, ad::Var bids, std::span<const ad::Var> params) const override;

  // Raw head output [batch, n, m] before pooling.
  ad::Var head_output(ad::Tape& tape, ad::Var bids, Head head, std::span<const ad::Var> params) const;

  std::size_t layers_per_head() const noexcept { return config_.hidden_layers + 1; }

 private:
  NetworkConfig config_;
  ParameterSet params_;
};

// Size-bound dense baseline: allocation trunk emits per-item softmax over
// n bidders plus a "not sold" slot; payment trunk emits a sigmoid fraction
// per bidder.
class RegretNet final : public LearnedMechanism {
 public:
  RegretNet(std::size_t bidders, std::size_t items, const NetworkConfig& config, std::uint64_t seed);
  RegretNet(std::size_t bidders, std::size_t items, const NetworkConfig& config, ParameterSet params);

  Architecture architecture() const override { return Architecture::kRegretNet; }
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }
  std::unique_ptr<LearnedMechanism> clone() const override;
  std::string name() const override { return "regretnet"; }
  const NetworkConfig& config() const noexcept { return config_; }
  std::size_t bidders() const noexcept { return n_; }
  std::size_t items() const noexcept { return m_; }

  MechanismVars forward_with(ad::Tape& tape, ad::Var bids, std::span<const ad::Var> params) const override;

 private:
  std::size_t n_;
  std::size_t m_;
  NetworkConfig config_;
  ParameterSet params_;
};

// n and m are only used by size-bound architectures.
std::unique_ptr<LearnedMechanism> make_mechanism(Architecture arch, std::size_t bidders, std::size_t items,
                                                 const NetworkConfig& config, std::uint64_t seed);

}  // namespace eqa
