#include <gtest/gtest.h>

#include <cmath>

#include "eqa/autodiff.hpp"
#include "eqa/rng.hpp"
#include "support/gradient_checks.hpp"
#include "support/toy_mechanisms.hpp"

namespace eqa {
namespace {

using testing::numeric_gradient;
using testing::relative_error;
using testing::OpCase;
using testing::op_cases;
using testing::op_gradient_error;
using testing::random_tensor;

TEST(AutodiffForward, TanhOfZero) {
  ad::Tape t;
  EXPECT_DOUBLE_EQ(ad::tanh(t.constant(Tensor::scalar(0.0))).value().item(), 0.0);
}

TEST(AutodiffForward, UniformSoftmax) {
  ad::Tape t;
  const Tensor s = ad::softmax(t.constant(Tensor(Shape{3}, 0.0)), 0).value();
  for (double x : s.data()) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

TEST(AutodiffForward, MeanOverRows) {
  ad::Tape t;
  const Tensor m = ad::mean(t.constant(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3, 4})), 0).value();
  EXPECT_EQ(m.shape(), (Shape{1, 2}));
  EXPECT_DOUBLE_EQ(m[0], 2.0);
  EXPECT_DOUBLE_EQ(m[1], 3.0);
}

TEST(AutodiffForward, SoftmaxIsStableForLargeInputs) {
  ad::Tape t;
  const Tensor s = ad::softmax(t.constant(Tensor(Shape{2}, std::vector<double>{1000.0, 1000.0})), 0).value();
  EXPECT_NEAR(s[0], 0.5, 1e-15);
  const Tensor g = ad::sigmoid(t.constant(Tensor(Shape{2}, std::vector<double>{-800.0, 800.0}))).value();
  EXPECT_TRUE(g.all_finite());
}

TEST(AutodiffForward, BroadcastShapeMismatchNamesShapes) {
  ad::Tape t;
  try {
    ad::add(t.constant(Tensor(Shape{2, 3})), t.constant(Tensor(Shape{3, 2})));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos) << e.what();
  }
}

TEST(AutodiffBackward, SquareGradient) {
  ad::Tape t;
  ad::Var x = t.variable(Tensor::scalar(3.0));
  t.backward(ad::square(x));
  EXPECT_DOUBLE_EQ(t.gradient(x).item(), 6.0);
}

TEST(AutodiffBackward, SigmoidAtZero) {
  ad::Tape t;
  ad::Var x = t.variable(Tensor::scalar(0.0));
  t.backward(ad::sigmoid(x));
  EXPECT_DOUBLE_EQ(t.gradient(x).item(), 0.25);
}

TEST(AutodiffBackward, MatmulMatchesFiniteDifferences) {
  Rng rng(11);
  const Tensor a = random_tensor(Shape{3, 4}, rng);
  const Tensor b = random_tensor(Shape{4, 2}, rng);
  ad::Tape t;
  ad::Var va = t.variable(a), vb = t.variable(b);
  t.backward(ad::sum_all(ad::matmul(va, vb)));
  auto fa = [&](const Tensor& x) {
    ad::Tape u;
    return ad::sum_all(ad::matmul(u.constant(x), u.constant(b))).value().item();
  };
  auto fb = [&](const Tensor& x) {
    ad::Tape u;
    return ad::sum_all(ad::matmul(u.constant(a), u.constant(x))).value().item();
  };
  EXPECT_LE(relative_error(t.gradient(va), numeric_gradient(fa, a)), 1e-6);
  EXPECT_LE(relative_error(t.gradient(vb), numeric_gradient(fb, b)), 1e-6);
}

TEST(AutodiffBackward, FanOutAccumulates) {
  ad::Tape t;
  ad::Var x = t.variable(Tensor::scalar(2.0));
  t.backward(x * x + x);
  EXPECT_DOUBLE_EQ(t.gradient(x).item(), 5.0);
}

TEST(AutodiffBackward, SecondBackwardThrows) {
  ad::Tape t;
  ad::Var x = t.variable(Tensor::scalar(1.0));
  ad::Var y = ad::square(x);
  t.backward(y);
  EXPECT_THROW(t.backward(y), std::logic_error);
}

TEST(AutodiffBackward, NonScalarLossThrows) {
  ad::Tape t;
  ad::Var x = t.variable(Tensor(Shape{2}, 1.0));
  EXPECT_THROW(t.backward(x), ShapeError);
}

TEST(AutodiffBackward, ConstantsReceiveNoGradient) {
  ad::Tape t;
  ad::Var c = t.constant(Tensor::scalar(2.0));
  ad::Var x = t.variable(Tensor::scalar(3.0));
  t.backward(c * x);
  EXPECT_DOUBLE_EQ(t.gradient(c).item(), 0.0);
  EXPECT_DOUBLE_EQ(t.gradient(x).item(), 2.0);
}

class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const OpCase c = op_cases()[static_cast<std::size_t>(GetParam())];
  Rng rng(100 + static_cast<std::uint64_t>(GetParam()));
  Tensor x = random_tensor(c.shape, rng);
  // Keep relu and max away from their kinks.
  for (double& v : x.data()) {
    if (std::abs(v) < 0.05) v += 0.1;
  }
  EXPECT_LE(op_gradient_error(c.op, x), 1e-6) << c.name;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range(0, 19), [](const auto& info) {
  return std::string(op_cases()[static_cast<std::size_t>(info.param)].name);
});

}  // namespace
}  // namespace eqa
