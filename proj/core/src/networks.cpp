#include "eqa/networks.hpp"

#include <stdexcept>

namespace eqa {

namespace {

constexpr const char* kHeadNames[] = {"sale", "winner", "payment"};

void require_same_layout(const ParameterSet& expected, const ParameterSet& got, const std::string& what) {
  if (expected.size() != got.size()) {
    throw std::invalid_argument(what + ": expected " + std::to_string(expected.size()) + " parameter tensors, got " +
                                std::to_string(got.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].name != got[i].name || expected[i].value.shape() != got[i].value.shape()) {
      throw std::invalid_argument(what + ": parameter " + std::to_string(i) + " is '" + got[i].name + "' " +
                                  shape_to_string(got[i].value.shape()) + ", expected '" + expected[i].name + "' " +
                                  shape_to_string(expected[i].value.shape()));
    }
  }
}

ParameterSet equivariant_layout(const NetworkConfig& c, Rng& rng) {
  if (c.hidden_layers == 0 || c.channels == 0) throw std::invalid_argument("equivariant net needs hidden layers");
  ParameterSet params;
  for (const char* head : kHeadNames) {
    std::size_t in = 1;
    for (std::size_t l = 0; l < c.hidden_layers; ++l) {
      ExchangeableLayer::glorot(in, c.channels, Activation::kTanh, rng)
          .append_to(params, std::string(head) + "." + std::to_string(l));
      in = c.channels;
    }
    ExchangeableLayer::glorot(in, 1, Activation::kIdentity, rng)
        .append_to(params, std::string(head) + "." + std::to_string(c.hidden_layers));
  }
  return params;
}

ParameterSet regretnet_layout(std::size_t n, std::size_t m, const NetworkConfig& c, Rng& rng) {
  if (n == 0 || m == 0) throw std::invalid_argument("regretnet needs positive bidder and item counts");
  if (c.baseline_hidden_layers == 0 || c.baseline_width == 0) {
    throw std::invalid_argument("regretnet needs hidden layers");
  }
  ParameterSet params;
  auto trunk = [&](const std::string& name, std::size_t out) {
    std::size_t in = n * m;
    for (std::size_t l = 0; l < c.baseline_hidden_layers; ++l) {
      DenseLayer::glorot(in, c.baseline_width, Activation::kTanh, rng).append_to(params, name + "." + std::to_string(l));
      in = c.baseline_width;
    }
    DenseLayer::glorot(in, out, Activation::kIdentity, rng)
        .append_to(params, name + "." + std::to_string(c.baseline_hidden_layers));
  };
  trunk("alloc", (n + 1) * m);
  trunk("pay", n);
  return params;
}

void check_bids(ad::Var bids) {
  if (bids.shape().size() != 3) {
    throw ShapeError("mechanism: bids must be [batch,n,m], got " + shape_to_string(bids.shape()));
  }
  validate_bids(bids.value());
}

}  // namespace

EquivariantNet::EquivariantNet(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
  Rng rng = make_stream(seed, Stream::kInit);
  params_ = equivariant_layout(config_, rng);
}

EquivariantNet::EquivariantNet(const NetworkConfig& config, ParameterSet params) : config_(config) {
  Rng rng(0);
  require_same_layout(equivariant_layout(config_, rng), params, "EquivariantNet");
  params_ = std::move(params);
}

std::unique_ptr<LearnedMechanism> EquivariantNet::clone() const { return std::make_unique<EquivariantNet>(*this); }

ad::Var EquivariantNet::head_output(ad::Tape&, ad::Var bids, Head head, std::span<const ad::Var> params) const {
  if (params.size() != params_.size()) throw std::invalid_argument("EquivariantNet: parameter handle count mismatch");
  const Shape s = bids.shape();
  const std::size_t per_head = 5 * layers_per_head();
  std::size_t idx = static_cast<std::size_t>(head) * per_head;
  ad::Var x = ad::reshape(bids, Shape{s[0], s[1], s[2], 1});
  for (std::size_t l = 0; l < layers_per_head(); ++l, idx += 5) {
    const Activation act = l + 1 < layers_per_head() ? Activation::kTanh : Activation::kIdentity;
    x = exchangeable(x, {params[idx], params[idx + 1], params[idx + 2], params[idx + 3], params[idx + 4]}, act);
  }
  return ad::reshape(x, Shape{s[0], s[1], s[2]});
}

MechanismVars EquivariantNet::forward_with(ad::Tape& tape, ad::Var bids, std::span<const ad::Var> params) const {
  check_bids(bids);
  const Shape s = bids.shape();
  ad::Var sale = ad::sigmoid(ad::mean(head_output(tape, bids, Head::kSale, params), 1));        // [B,1,m]
  ad::Var winner = ad::softmax(head_output(tape, bids, Head::kWinner, params), 1);              // [B,n,m]
  ad::Var allocation = sale * winner;                                                           // [B,n,m]
  ad::Var frac = ad::sigmoid(ad::mean(head_output(tape, bids, Head::kPaymentFraction, params), 2));  // [B,n,1]
  ad::Var payments = payments_from_fraction(ad::reshape(frac, Shape{s[0], s[1]}), allocation, bids);
  return {allocation, payments};
}

RegretNet::RegretNet(std::size_t bidders, std::size_t items, const NetworkConfig& config, std::uint64_t seed)
    : n_(bidders), m_(items), config_(config) {
  Rng rng = make_stream(seed, Stream::kInit);
  params_ = regretnet_layout(n_, m_, config_, rng);
}

RegretNet::RegretNet(std::size_t bidders, std::size_t items, const NetworkConfig& config, ParameterSet params)
    : n_(bidders), m_(items), config_(config) {
  Rng rng(0);
  require_same_layout(regretnet_layout(n_, m_, config_, rng), params, "RegretNet");
  params_ = std::move(params);
}

std::unique_ptr<LearnedMechanism> RegretNet::clone() const { return std::make_unique<RegretNet>(*this); }

MechanismVars RegretNet::forward_with(ad::Tape&, ad::Var bids, std::span<const ad::Var> params) const {
  check_bids(bids);
  const Shape s = bids.shape();
  if (s[1] != n_ || s[2] != m_) {
    throw SizeBoundArchitecture("regretnet is size-bound: trained for " + std::to_string(n_) + "x" +
                                std::to_string(m_) + ", got " + std::to_string(s[1]) + "x" + std::to_string(s[2]));
  }
  if (params.size() != params_.size()) throw std::invalid_argument("RegretNet: parameter handle count mismatch");
  const std::size_t per_trunk = 2 * (config_.baseline_hidden_layers + 1);
  auto trunk = [&](ad::Var x, std::size_t first) {
    for (std::size_t l = 0; l <= config_.baseline_hidden_layers; ++l) {
      const Activation act = l < config_.baseline_hidden_layers ? Activation::kTanh : Activation::kIdentity;
      x = dense(x, params[first + 2 * l], params[first + 2 * l + 1], act);
    }
    return x;
  };
  ad::Var flat = ad::reshape(bids, Shape{s[0], n_ * m_});
  ad::Var logits = ad::reshape(trunk(flat, 0), Shape{s[0], n_ + 1, m_});
  std::vector<std::size_t> real_bidders(n_);
  for (std::size_t i = 0; i < n_; ++i) real_bidders[i] = i;
  ad::Var allocation = ad::index_select(ad::softmax(logits, 1), 1, real_bidders);
  ad::Var frac = ad::sigmoid(trunk(flat, per_trunk));
  return {allocation, payments_from_fraction(frac, allocation, bids)};
}

std::unique_ptr<LearnedMechanism> make_mechanism(Architecture arch, std::size_t bidders, std::size_t items,
                                                 const NetworkConfig& config, std::uint64_t seed) {
  if (arch == Architecture::kEquivariant) return std::make_unique<EquivariantNet>(config, seed);
  return std::make_unique<RegretNet>(bidders, items, config, seed);
}

}  // namespace eqa
