#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "eqa/adam.hpp"

namespace eqa {
namespace {

ParameterSet one_param(double value, std::size_t n = 3) {
  ParameterSet p;
  p.add("w", Tensor(Shape{n}, value));
  return p;
}

// Hand-evaluated Adam step for a scalar gradient history.
double reference_step(const std::vector<double>& grads, double lr = 1e-3) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0, delta = 0.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    delta = -lr * mh / (std::sqrt(vh) + eps);
  }
  return delta;
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParameterSet p = one_param(0.5);
  AdamState s = AdamState::zeros_like(p);
  const std::vector<Tensor> g{Tensor(Shape{3}, 0.0)};
  adam_update(p, g, s);
  for (double x : p[0].value.data()) EXPECT_EQ(x, 0.5);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepWithUnitGradient) {
  ParameterSet p = one_param(0.0);
  AdamState s = AdamState::zeros_like(p);
  const std::vector<Tensor> g{Tensor(Shape{3}, 1.0)};
  adam_update(p, g, s);
  for (double x : p[0].value.data()) EXPECT_NEAR(x, -0.001, 1e-11);
}

TEST(Adam, SecondStepMatchesClosedForm) {
  for (const auto& history : {std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 0.25}, std::vector<double>{-2.0, 3.0}}) {
    ParameterSet p = one_param(0.0, 1);
    AdamState s = AdamState::zeros_like(p);
    double before = 0.0;
    for (double g : history) {
      before = p[0].value[0];
      adam_update(p, std::vector<Tensor>{Tensor(Shape{1}, g)}, s);
    }
    EXPECT_NEAR(p[0].value[0] - before, reference_step(history), 1e-15);
  }
}

TEST(Adam, StepCountIncreases) {
  ParameterSet p = one_param(0.0);
  AdamState s = AdamState::zeros_like(p);
  for (int i = 0; i < 3; ++i) adam_update(p, std::vector<Tensor>{Tensor(Shape{3}, 1.0)}, s);
  EXPECT_EQ(s.step, 3u);
}

TEST(Adam, NonFiniteGradientIsRejectedBeforeAnyUpdate) {
  ParameterSet p;
  p.add("a", Tensor(Shape{1}, 1.0));
  p.add("b", Tensor(Shape{1}, 1.0));
  AdamState s = AdamState::zeros_like(p);
  const std::vector<Tensor> g{Tensor(Shape{1}, 1.0), Tensor(Shape{1}, std::numeric_limits<double>::infinity())};
  try {
    adam_update(p, g, s);
    FAIL() << "expected NonFiniteGradient";
  } catch (const NonFiniteGradient& e) {
    EXPECT_EQ(e.parameter(), "b");
  }
  EXPECT_EQ(p[0].value[0], 1.0);
  EXPECT_EQ(s.step, 0u);
}

TEST(Adam, ShapeMismatchThrows) {
  ParameterSet p = one_param(0.0);
  AdamState s = AdamState::zeros_like(p);
  EXPECT_THROW(adam_update(p, std::vector<Tensor>{Tensor(Shape{2}, 1.0)}, s), ShapeError);
}

}  // namespace
}  // namespace eqa
