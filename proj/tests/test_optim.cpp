#include <gtest/gtest.h>

#include <cmath>

#include "authorgan/error.hpp"
#include "authorgan/optim.hpp"

using namespace authorgan;

namespace {

void step_once(OptimizerState& s, Tensor& theta, const Tensor& g) {
  Tensor* params[] = {&theta};
  const Tensor grads[] = {g};
  optimizer_step(s, params, grads);
}

}  // namespace

TEST(Optimizer, SgdExample) {
  OptimizerState s({OptimizerKind::sgd, 0.1});
  Tensor theta = Tensor::scalar(1.0);
  step_once(s, theta, Tensor::scalar(0.5));
  EXPECT_DOUBLE_EQ(theta.item(), 0.95);
}

TEST(Optimizer, AdamFirstStepBiasCorrectionCancels) {
  OptimizerState s({OptimizerKind::adam, 0.001, 0.9, 0.999, 0.9, 1e-8});
  Tensor theta = Tensor::scalar(0.0);
  step_once(s, theta, Tensor::scalar(1.0));
  EXPECT_NEAR(theta.item(), -0.001, 1e-10);
  EXPECT_EQ(s.step_count, 1);
}

TEST(Optimizer, RmspropExample) {
  OptimizerConfig c;
  c.kind = OptimizerKind::rmsprop;
  c.lr = 0.01;
  c.rho = 0.9;
  c.epsilon = 1e-8;
  OptimizerState s(c);
  Tensor theta = Tensor::scalar(0.0);
  step_once(s, theta, Tensor::scalar(2.0));
  EXPECT_NEAR(theta.item(), -0.0316228, 1e-7);
}

TEST(Optimizer, AdamMatchesHandRolledRecurrence) {
  OptimizerConfig c{OptimizerKind::adam, 2e-4, 0.5, 0.999, 0.9, 1e-8};
  OptimizerState s(c);
  Tensor theta = Tensor::from({0.3, -1.2});
  double th[2] = {0.3, -1.2}, m[2] = {0, 0}, v[2] = {0, 0};
  const double gs[4][2] = {{0.5, -1.0}, {0.1, 2.0}, {-0.7, 0.0}, {1.5, -0.3}};
  for (int t = 1; t <= 4; ++t) {
    step_once(s, theta, Tensor::from({gs[t - 1][0], gs[t - 1][1]}));
    for (int i = 0; i < 2; ++i) {
      const double g = gs[t - 1][i];
      m[i] = 0.5 * m[i] + 0.5 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.5, t)), vh = v[i] / (1 - std::pow(0.999, t));
      th[i] -= 2e-4 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  EXPECT_NEAR(theta[0], th[0], 1e-15);
  EXPECT_NEAR(theta[1], th[1], 1e-15);
  EXPECT_EQ(s.step_count, 4);
}

TEST(Optimizer, ZeroGradientLeavesParametersUnchanged) {
  for (auto kind : {OptimizerKind::adam, OptimizerKind::rmsprop, OptimizerKind::sgd}) {
    OptimizerConfig c;
    c.kind = kind;
    OptimizerState s(c);
    Tensor theta = Tensor::from({1.0, -2.0, 0.5});
    const Tensor before = theta;
    for (int i = 0; i < 3; ++i) step_once(s, theta, Tensor(Shape{3}, 0.0));
    EXPECT_EQ(theta, before) << optimizer_palette_kind(kind);
  }
}

TEST(Optimizer, ShapeMismatchIsShapeError) {
  OptimizerState s;
  Tensor theta = Tensor::from({1.0, 2.0});
  EXPECT_THROW(step_once(s, theta, Tensor::from({1.0})), ShapeError);
}

TEST(Optimizer, MomentBuffersShapedLikeParams) {
  OptimizerState s;
  Tensor a(Shape{2, 3}), b(Shape{4});
  Tensor* params[] = {&a, &b};
  const Tensor grads[] = {Tensor(Shape{2, 3}, 1.0), Tensor(Shape{4}, 1.0)};
  optimizer_step(s, params, grads);
  ASSERT_EQ(s.first_moment.size(), 2u);
  EXPECT_EQ(s.first_moment[0].shape(), (Shape{2, 3}));
  EXPECT_EQ(s.second_moment[1].shape(), Shape{4});
}

TEST(Optimizer, VarStepConsumesGradients) {
  OptimizerState s({OptimizerKind::sgd, 0.5});
  Var p = parameter(Tensor::from({1.0, 1.0}));
  backward(sum(scale(p, 2.0)));
  optimizer_step(s, std::vector<Var>{p});
  EXPECT_EQ(p.value(), Tensor::from({0.0, 0.0}));
  EXPECT_FALSE(p.grad().has_value());
}

TEST(Optimizer, SpecRoundTrip) {
  const OptimizerConfig c{OptimizerKind::rmsprop, 5e-5, 0.9, 0.999, 0.95, 1e-7};
  EXPECT_EQ(optimizer_from_spec(optimizer_to_spec(c)).lr, c.lr);
  EXPECT_EQ(optimizer_from_spec(optimizer_to_spec(c)).rho, c.rho);
  EXPECT_THROW(optimizer_from_spec({"Dense", {}}), ParamError);
}
