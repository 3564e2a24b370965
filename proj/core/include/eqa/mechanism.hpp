#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "eqa/autodiff.hpp"
#include "eqa/parameters.hpp"
#include "eqa/tensor.hpp"

namespace eqa {

// Bids or valuations of n bidders for m items, row-major (bidder-major).
class ValuationProfile {
 public:
  ValuationProfile(std::size_t n, std::size_t m, std::vector<double> values);

  std::size_t bidders() const noexcept { return n_; }
  std::size_t items() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * m_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * m_, m_}; }
  const std::vector<double>& values() const noexcept { return values_; }

  // [n, m]
  Tensor as_tensor() const;

 private:
  std::size_t n_;
  std::size_t m_;
  std::vector<double> values_;
};

// Throws std::invalid_argument when any bid is negative or non-finite.
void validate_bids(const Tensor& bids);

// Allocation [batch, n, m] and payments [batch, n] (or [n, m] / [n] for a
// single profile).
struct MechanismOutput {
  Tensor allocation;
  Tensor payments;
};

struct MechanismVars {
  ad::Var allocation;
  ad::Var payments;
};

class Mechanism {
 public:
  virtual ~Mechanism() = default;

  // bids: [batch, n, m]. Returns allocation [batch, n, m], payments [batch, n].
  virtual MechanismVars forward(ad::Tape& tape, ad::Var bids) const = 0;
  virtual std::string name() const = 0;
};

// Evaluates without tracking gradients. Accepts [n, m] or [batch, n, m] bids
// and returns outputs of matching rank.
MechanismOutput evaluate(const Mechanism& mechanism, const Tensor& bids);

// u_i = sum_j g_ij * v_ij - p_i for a single-profile output.
double utility(std::span<const double> values, const MechanismOutput& out, std::size_t bidder);

enum class Architecture { kEquivariant, kRegretNet };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

class SizeBoundArchitecture : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A mechanism whose behaviour is determined by a ParameterSet.
class LearnedMechanism : public Mechanism {
 public:
  virtual Architecture architecture() const = 0;
  virtual ParameterSet& parameters() = 0;
  virtual const ParameterSet& parameters() const = 0;
  virtual std::unique_ptr<LearnedMechanism> clone() const = 0;

  // Forward pass with externally bound parameter handles, aligned with
  // parameters(). Used by training to obtain parameter gradients.
  virtual MechanismVars forward_with(ad::Tape& tape, ad::Var bids, std::span<const ad::Var> params) const = 0;

  MechanismVars forward(ad::Tape& tape, ad::Var bids) const override;
};

// p_i = fraction_i * sum_j g_ij b_ij; fraction has shape [batch, n].
ad::Var payments_from_fraction(ad::Var fraction, ad::Var allocation, ad::Var bids);

}  // namespace eqa
