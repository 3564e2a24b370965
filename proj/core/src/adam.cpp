#include "eqa/adam.hpp"

#include <cmath>

namespace eqa {

AdamState AdamState::zeros_like(const ParameterSet& params, AdamOptions options) {
  AdamState s;
  s.options = options;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.value.shape(), 0.0);
    s.second_moment.emplace_back(p.value.shape(), 0.0);
  }
  return s;
}

void adam_step(std::span<double> x, std::span<const double> grad, std::span<double> m, std::span<double> v,
               std::uint64_t step, const AdamOptions& options) {
  const double t = static_cast<double>(step);
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * grad[i];
    v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    x[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
  }
}

void adam_update(ParameterSet& params, std::span<const Tensor> gradients, AdamState& state) {
  if (gradients.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment counts disagree");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& s = params[i].value.shape();
    if (gradients[i].shape() != s || state.first_moment[i].shape() != s || state.second_moment[i].shape() != s) {
      throw ShapeError("adam_update: shape mismatch for parameter '" + params[i].name + "': " + shape_to_string(s) +
                       " vs gradient " + shape_to_string(gradients[i].shape()));
    }
    if (!gradients[i].all_finite()) throw NonFiniteGradient(params[i].name);
  }
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_step(params[i].value.data(), gradients[i].data(), state.first_moment[i].data(),
              state.second_moment[i].data(), state.step, state.options);
  }
}

}  // namespace eqa
