#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "eqa/autodiff.hpp"
#include "eqa/parameters.hpp"
#include "eqa/rng.hpp"
#include "eqa/tensor.hpp"

namespace eqa {

enum class Activation { kIdentity, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Tape handles for one exchangeable layer: four [K, O] mixing matrices
// (entry, column-pool over bidders, row-pool over items, global pool) and an
// [O] bias.
struct ExchangeableVars {
  ad::Var entry;
  ad::Var bidder_pool;
  ad::Var item_pool;
  ad::Var global_pool;
  ad::Var bias;
};

// Exchangeable matrix layer on channels-last input [batch, n, m, K] (or
// [n, m, K]); returns [batch, n, m, O]. Pool normalizations use the runtime
// n and m of the input. Equivariant in both bidder and item axes.
ad::Var exchangeable(ad::Var input, const ExchangeableVars& w, Activation activation);

// Same map assembled from primitive tape ops. Slower; kept as an independent
// route for cross-checking the fused kernel.
ad::Var exchangeable_composed(ad::Var input, const ExchangeableVars& w, Activation activation);

// Affine map over the last axis followed by the activation.
ad::Var dense(ad::Var input, ad::Var weight, ad::Var bias, Activation activation);

class ExchangeableLayer {
 public:
  ExchangeableLayer(std::size_t in_channels, std::size_t out_channels, Activation activation);

  // Glorot-uniform weights with fan (K, O); zero bias.
  static ExchangeableLayer glorot(std::size_t in_channels, std::size_t out_channels, Activation activation, Rng& rng);

  std::size_t in_channels() const noexcept { return in_; }
  std::size_t out_channels() const noexcept { return out_; }
  Activation activation() const noexcept { return activation_; }
  std::size_t parameter_count() const noexcept { return 4 * in_ * out_ + out_; }

  Tensor entry, bidder_pool, item_pool, global_pool, bias;

  // [n, m, K] or [batch, n, m, K] in, matching rank out.
  Tensor forward(const Tensor& input) const;
  ExchangeableVars bind(ad::Tape& tape, bool track) const;

  // Appends the five tensors as "<prefix>.w1".."<prefix>.w4", "<prefix>.b".
  void append_to(ParameterSet& params, const std::string& prefix) const;

 private:
  std::size_t in_;
  std::size_t out_;
  Activation activation_;
};

class DenseLayer {
 public:
  DenseLayer(std::size_t in_width, std::size_t out_width, Activation activation);
  static DenseLayer glorot(std::size_t in_width, std::size_t out_width, Activation activation, Rng& rng);

  std::size_t in_width() const noexcept { return in_; }
  std::size_t out_width() const noexcept { return out_; }
  Activation activation() const noexcept { return activation_; }

  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  // [..., in] -> [..., out]
  Tensor forward(const Tensor& input) const;
  void append_to(ParameterSet& params, const std::string& prefix) const;

 private:
  std::size_t in_;
  std::size_t out_;
  Activation activation_;
};

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace eqa
