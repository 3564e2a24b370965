#include "eqa/mechanism.hpp"

#include <cmath>
#include <stdexcept>

namespace eqa {

ValuationProfile::ValuationProfile(std::size_t n, std::size_t m, std::vector<double> values)
    : n_(n), m_(m), values_(std::move(values)) {
  if (n == 0 || m == 0) throw std::invalid_argument("valuation profile needs at least one bidder and one item");
  if (values_.size() != n * m) throw ShapeError("valuation profile: expected " + std::to_string(n * m) + " values");
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("valuation profile entries must be finite and >= 0");
  }
}

Tensor ValuationProfile::as_tensor() const { return Tensor(Shape{n_, m_}, values_); }

void validate_bids(const Tensor& bids) {
  for (double b : bids.storage()) {
    if (!std::isfinite(b)) throw std::invalid_argument("bids must be finite");
    if (b < 0.0) throw std::invalid_argument("bids must be nonnegative");
  }
}

MechanismOutput evaluate(const Mechanism& mechanism, const Tensor& bids) {
  const bool single = bids.rank() == 2;
  if (!single && bids.rank() != 3) {
    throw ShapeError("evaluate: bids must be [n,m] or [batch,n,m], got " + shape_to_string(bids.shape()));
  }
  ad::Tape tape;
  const Shape s = bids.shape();
  ad::Var b = tape.constant(single ? bids.reshaped(Shape{1, s[0], s[1]}) : bids);
  MechanismVars out = mechanism.forward(tape, b);
  if (!single) return {out.allocation.value(), out.payments.value()};
  return {out.allocation.value().reshaped(Shape{s[0], s[1]}), out.payments.value().reshaped(Shape{s[0]})};
}

double utility(std::span<const double> values, const MechanismOutput& out, std::size_t bidder) {
  const Shape& gs = out.allocation.shape();
  if (gs.size() != 2) throw ShapeError("utility: expected single-profile allocation, got " + shape_to_string(gs));
  if (bidder >= gs[0]) throw std::out_of_range("utility: bidder index out of range");
  if (values.size() != gs[1]) throw ShapeError("utility: valuation length does not match item count");
  double u = -out.payments[bidder];
  for (std::size_t j = 0; j < gs[1]; ++j) u += out.allocation[bidder * gs[1] + j] * values[j];
  return u;
}

std::string to_string(Architecture a) { return a == Architecture::kEquivariant ? "equivariant" : "regretnet"; }

Architecture architecture_from_string(const std::string& s) {
  if (s == "equivariant") return Architecture::kEquivariant;
  if (s == "regretnet" || s == "baseline") return Architecture::kRegretNet;
  throw std::invalid_argument("unknown architecture: " + s);
}

MechanismVars LearnedMechanism::forward(ad::Tape& tape, ad::Var bids) const {
  const auto vars = bind_parameters(tape, parameters(), false);
  return forward_with(tape, bids, vars);
}

ad::Var payments_from_fraction(ad::Var fraction, ad::Var allocation, ad::Var bids) {
  const Shape& s = bids.shape();
  ad::Var allocated_value = ad::reshape(ad::sum(allocation * bids, 2), Shape{s[0], s[1]});
  return fraction * allocated_value;
}

}  // namespace eqa
