#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "eqa/autodiff.hpp"
#include "eqa/rng.hpp"
#include "support/toy_mechanisms.hpp"

namespace eqa::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = lo + (hi - lo) * rng.uniform();
  return t;
}

// Gradient of sum(op(x) * weights) through the tape vs central differences.
inline double op_gradient_error(const std::function<ad::Var(ad::Var)>& op, const Tensor& x, std::uint64_t seed = 3) {
  Tensor probe_out;
  {
    ad::Tape t;
    probe_out = op(t.constant(x)).value();
  }
  Rng rng(seed);
  const Tensor weights = random_tensor(probe_out.shape(), rng);
  auto f = [&](const Tensor& in) {
    ad::Tape t;
    const Tensor y = op(t.constant(in)).value();
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += y[k] * weights[k];
    return s;
  };
  ad::Tape tape;
  ad::Var v = tape.variable(x);
  ad::Var loss = ad::sum_all(op(v) * tape.constant(weights));
  tape.backward(loss);
  return relative_error(tape.gradient(v), numeric_gradient(f, x));
}

struct OpCase {
  const char* name;
  std::function<ad::Var(ad::Var)> op;
  Shape shape;
};

inline std::vector<OpCase> op_cases() {
  auto konst = [](ad::Var x, Shape s, std::uint64_t seed) {
    Rng rng(seed);
    return x.tape().constant(random_tensor(std::move(s), rng));
  };
  return {
      {"add_broadcast", [konst](ad::Var x) { return x + konst(x, {1, 3}, 1); }, {2, 3}},
      {"sub_broadcast", [konst](ad::Var x) { return konst(x, {2, 1}, 2) - x; }, {2, 3}},
      {"mul_broadcast", [konst](ad::Var x) { return x * konst(x, {2, 1, 4}, 3); }, {2, 3, 4}},
      {"mul_self", [](ad::Var x) { return x * x; }, {3, 2}},
      {"add_scalar", [](ad::Var x) { return ad::add_scalar(x, 0.7); }, {4}},
      {"scale", [](ad::Var x) { return ad::scale(x, -1.3); }, {2, 2}},
      {"square", [](ad::Var x) { return ad::square(x); }, {5}},
      {"matmul", [konst](ad::Var x) { return ad::matmul(x, konst(x, {4, 3}, 4)); }, {2, 5, 4}},
      {"tanh", [](ad::Var x) { return ad::tanh(x); }, {3, 3}},
      {"sigmoid", [](ad::Var x) { return ad::sigmoid(x); }, {3, 3}},
      {"relu", [](ad::Var x) { return ad::relu(x); }, {6}},
      {"sum_axis1", [](ad::Var x) { return ad::sum(x, 1); }, {2, 3, 2}},
      {"mean_axis0", [](ad::Var x) { return ad::mean(x, 0); }, {3, 2}},
      {"max_axis1", [](ad::Var x) { return ad::max(x, 1); }, {2, 4}},
      {"sum_all", [](ad::Var x) { return ad::sum_all(x); }, {2, 3}},
      {"softmax_axis1", [](ad::Var x) { return ad::softmax(x, 1); }, {2, 3, 2}},
      {"softmax_axis0", [](ad::Var x) { return ad::softmax(x, 0); }, {4, 2}},
      {"reshape", [](ad::Var x) { return ad::reshape(x, Shape{3, 2}) * ad::reshape(x, Shape{3, 2}); }, {2, 3}},
      {"index_select", [](ad::Var x) { return ad::index_select(x, 1, {2, 0, 0}); }, {2, 3}},
  };
}

}  // namespace eqa::testing
