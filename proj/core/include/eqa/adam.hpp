#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqa/parameters.hpp"
#include "eqa/tensor.hpp"

namespace eqa {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  static AdamState zeros_like(const ParameterSet& params, AdamOptions options = {});
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(std::string parameter)
      : std::runtime_error("non-finite gradient for parameter '" + parameter + "'"), parameter_(std::move(parameter)) {}
  const std::string& parameter() const noexcept { return parameter_; }

 private:
  std::string parameter_;
};

// One bias-corrected Adam descent step on every parameter.
void adam_update(ParameterSet& params, std::span<const Tensor> gradients, AdamState& state);

// Raw Adam descent step on a flat buffer; `step` is the 1-based step index
// after incrementing. Moments are updated in place.
void adam_step(std::span<double> x, std::span<const double> grad, std::span<double> m, std::span<double> v,
               std::uint64_t step, const AdamOptions& options);

}  // namespace eqa
