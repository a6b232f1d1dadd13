#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "authorgan/error.hpp"
#include "authorgan/layers.hpp"
#include "oracles.hpp"

using namespace authorgan;

TEST(Palette, ThirtyOneEntriesInSevenCategories) {
  const auto& p = palette();
  EXPECT_EQ(p.size(), 31u);
  std::set<std::string> cats, kinds;
  for (const auto& e : p) {
    cats.insert(std::string(category_name(e.category)));
    kinds.insert(e.kind);
  }
  EXPECT_EQ(cats, (std::set<std::string>{"convolutional", "recurrent", "core", "activation",
                                         "loss", "optimization", "normalization"}));
  EXPECT_EQ(kinds.size(), 31u) << "kinds must be unique";
}

TEST(Palette, CategoryCounts) {
  std::map<std::string, int> n;
  for (const auto& e : palette()) ++n[std::string(category_name(e.category))];
  EXPECT_EQ(n["convolutional"], 5);
  EXPECT_EQ(n["recurrent"], 3);
  EXPECT_EQ(n["core"], 8);
  EXPECT_EQ(n["activation"], 6);
  EXPECT_EQ(n["loss"], 4);
  EXPECT_EQ(n["optimization"], 3);
  EXPECT_EQ(n["normalization"], 2);
}

TEST(Palette, DeterministicListing) {
  const auto a = palette();
  const auto& b = palette();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].kind, b[i].kind);
  EXPECT_EQ(find_palette_entry("Dense")->kind, "Dense");
  EXPECT_EQ(find_palette_entry("HingeLoss"), nullptr);
}

TEST(BuildLayer, DenseShapes) {
  RngStream r(0);
  const auto l = build_layer({"Dense", {{"units", 128}}}, {784}, r);
  EXPECT_EQ(l.output_shape(), Shape{128});
  ASSERT_EQ(l.parameters().size(), 2u);
  EXPECT_EQ(l.parameters()[0].second.shape(), (Shape{784, 128}));
  EXPECT_EQ(l.parameters()[1].second.shape(), Shape{128});
}

TEST(BuildLayer, ConvShape) {
  RngStream r(0);
  const auto l = build_layer(
      {"Conv2D", {{"filters", 64}, {"kernel", 4}, {"stride", 2}, {"padding", 1}}}, {1, 28, 28}, r);
  EXPECT_EQ(l.output_shape(), (Shape{64, 14, 14}));
}

TEST(BuildLayer, DenseOnRankThreeIsShapeError) {
  RngStream r(0);
  EXPECT_THROW(build_layer({"Dense", {{"units", 4}}}, {1, 28, 28}, r), ShapeError);
}

TEST(BuildLayer, ParamErrorsNameTheKey) {
  RngStream r(0);
  try {
    build_layer({"Dense", {{"units", -3}}}, {4}, r);
    FAIL();
  } catch (const ParamError& e) {
    EXPECT_EQ(e.key(), "units");
  }
  try {
    build_layer({"Dense", {{"units", 3}, {"colour", 1}}}, {4}, r);
    FAIL();
  } catch (const ParamError& e) {
    EXPECT_EQ(e.key(), "colour");
  }
  try {
    build_layer({"Dense", {}}, {4}, r);
    FAIL();
  } catch (const ParamError& e) {
    EXPECT_EQ(e.key(), "units");
  }
}

TEST(BuildLayer, UnknownKindIsParamErrorOnTheKind) {
  RngStream r(0);
  try {
    build_layer({"Transformer", {}}, {4}, r);
    FAIL();
  } catch (const ParamError& e) {
    EXPECT_EQ(e.key(), "");
  }
}

TEST(BuildNetwork, ReportsFailingLayerIndex) {
  RngStream r(0);
  try {
    build_network({{"Flatten", {}}, {"Dense", {{"units", 4}}}, {"Reshape", {{"shape", std::vector<std::int64_t>{3}}}}},
                  {1, 2, 2}, r);
    FAIL();
  } catch (const LayerError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(Forward, IdentityDense) {
  RngStream r(0);
  auto l = build_layer({"Dense", {{"units", 3}}}, {3}, r);
  Var w = l.parameters()[0].second;
  w.mutable_value() = Tensor(Shape{3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Var b = l.parameters()[1].second;
  b.mutable_value() = Tensor(Shape{3}, 0.0);
  const Tensor x(Shape{2, 3}, {1, -2, 3, 4, 5, -6});
  ForwardContext ctx;
  EXPECT_EQ(l.forward(constant(x), ctx).value(), x);
}

TEST(Forward, LeakyRelu) {
  RngStream r(0);
  auto l = build_layer({"LeakyReLU", {{"alpha", 0.2}}}, {2}, r);
  ForwardContext ctx;
  const Tensor y = l.forward(constant(Tensor(Shape{1, 2}, {-1, 2})), ctx).value();
  EXPECT_DOUBLE_EQ(y[0], -0.2);
  EXPECT_DOUBLE_EQ(y[1], 2.0);
}

TEST(Forward, BatchNormTrainModeStatistics) {
  RngStream r(4);
  auto l = build_layer({"BatchNorm", {}}, {3}, r);
  Var scale = l.parameters()[0].second;
  Var shift = l.parameters()[1].second;
  scale.mutable_value() = Tensor::from({2.0, 0.5, 1.5});
  shift.mutable_value() = Tensor::from({-1.0, 0.0, 3.0});
  const Tensor x = Tensor::randn({64, 3}, r);
  ForwardContext ctx;
  const Tensor y = l.forward(constant(x), ctx).value();
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 64; ++i) m += y[i * 3 + c];
    m /= 64;
    for (std::size_t i = 0; i < 64; ++i) v += (y[i * 3 + c] - m) * (y[i * 3 + c] - m);
    v /= 64;
    // population variance shrinks by var/(var+eps); eps = 1e-5
    double xm = 0.0, xv = 0.0;
    for (std::size_t i = 0; i < 64; ++i) xm += x[i * 3 + c];
    xm /= 64;
    for (std::size_t i = 0; i < 64; ++i) xv += (x[i * 3 + c] - xm) * (x[i * 3 + c] - xm);
    xv /= 64;
    const double s = scale.value()[c];
    EXPECT_NEAR(m, shift.value()[c], 1e-6);
    EXPECT_NEAR(v, s * s * xv / (xv + 1e-5), 1e-6);
  }
}

TEST(Forward, EvalModeIsDeterministic) {
  RngStream r(4);
  auto drop = build_layer({"Dropout", {{"rate", 0.5}}}, {8}, r);
  const Tensor x = Tensor::randn({4, 8}, r);
  ForwardContext ctx;
  ctx.mode = Mode::eval;
  EXPECT_EQ(drop.forward(constant(x), ctx).value(), x);
}

TEST(Forward, DropoutInvertedScaling) {
  RngStream r(4), d(9);
  auto drop = build_layer({"Dropout", {{"rate", 0.5}}}, {1000}, r);
  const Tensor x(Shape{1, 1000}, 1.0);
  ForwardContext ctx;
  ctx.rng = &d;
  const Tensor y = drop.forward(constant(x), ctx).value();
  for (double v : y.data()) EXPECT_TRUE(v == 0.0 || v == 2.0);
}

TEST(Forward, ShapeMismatchIsShapeError) {
  RngStream r(0);
  auto l = build_layer({"Dense", {{"units", 3}}}, {4}, r);
  ForwardContext ctx;
  EXPECT_THROW(l.forward(constant(Tensor(Shape{2, 5})), ctx), ShapeError);
}

TEST(Forward, RecurrentKindsAreNotExecutable) {
  RngStream r(0);
  auto l = build_layer({"LSTM", {{"units", 4}}}, {5, 3}, r);
  EXPECT_EQ(l.output_shape(), Shape{4});
  ForwardContext ctx;
  EXPECT_THROW(l.forward(constant(Tensor(Shape{1, 5, 3})), ctx), Error);
}

TEST(InitParams, BiasIsZero) {
  RngStream r(0);
  const Tensor b = init_params(ParamInit::bias, {10}, 0, 0, r);
  for (double v : b.data()) EXPECT_EQ(v, 0.0);
}

TEST(InitParams, DenseWeightStd) {
  RngStream r(12);
  const std::size_t fan_in = 100, fan_out = 200;
  const Tensor w = init_params(ParamInit::dense_weight, {fan_in, fan_out}, fan_in, fan_out, r);
  double m = 0.0, v = 0.0;
  for (double x : w.data()) m += x;
  m /= static_cast<double>(w.size());
  for (double x : w.data()) v += (x - m) * (x - m);
  const double sd = std::sqrt(v / static_cast<double>(w.size() - 1));
  const double target = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  EXPECT_LT(std::fabs(sd - target) / target, 0.2);
}

TEST(InitParams, SameSeedSameParameters) {
  RngStream a(5), b(5);
  EXPECT_EQ(init_params(ParamInit::conv_weight, {4, 2, 3, 3}, 18, 36, a),
            init_params(ParamInit::conv_weight, {4, 2, 3, 3}, 18, 36, b));
}

TEST(Gradients, EveryDifferentiableLayerAndLoss) {
  for (const auto& c : oracle::gradient_suite()) {
    EXPECT_LT(c.error, 1e-4) << c.name;
  }
}
