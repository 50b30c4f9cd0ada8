#include "spare/model.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace spare;
using namespace spare::model;

TEST(Activation, ValuesAndRightDerivativeAtZero) {
  const auto relu = Activation::relu();
  EXPECT_EQ(relu.value(-2.0), 0.0);
  EXPECT_EQ(relu.value(3.0), 3.0);
  EXPECT_EQ(relu.derivative(0.0), 1.0);
  EXPECT_EQ(relu.derivative(-1e-300), 0.0);
  const auto leaky = Activation::leaky(0.1);
  EXPECT_DOUBLE_EQ(leaky.value(-2.0), -0.2);
  EXPECT_EQ(leaky.derivative(0.0), 1.0);
  EXPECT_DOUBLE_EQ(leaky.derivative(-1.0), 0.1);
  EXPECT_TRUE(leaky.piecewise_linear());
  EXPECT_FALSE(Activation::of(ActivationKind::tanh).piecewise_linear());
}

TEST(Activation, SmoothDerivativesMatchCentralDifferences) {
  for (auto k : {ActivationKind::tanh, ActivationKind::erf, ActivationKind::softplus, ActivationKind::identity}) {
    const auto a = Activation::of(k);
    for (double u : {-2.1, -0.3, 0.0, 0.7, 1.9}) {
      const double fd = (a.value(u + 1e-6) - a.value(u - 1e-6)) / 2e-6;
      EXPECT_NEAR(a.derivative(u), fd, 1e-8) << a.name() << " at " << u;
    }
  }
}

TEST(Activation, NameRoundTrip) {
  for (const auto& a : {Activation::relu(), Activation::leaky(0.25), Activation::of(ActivationKind::tanh),
                        Activation::of(ActivationKind::erf), Activation::of(ActivationKind::softplus),
                        Activation::of(ActivationKind::identity)})
    EXPECT_EQ(Activation::parse(a.name()), a);
  EXPECT_THROW(Activation::parse("sigmoid"), ConfigError);
  EXPECT_THROW(Activation::parse("leaky(x)"), ConfigError);
}

TEST(Init, SymmetricHalvesGiveZeroOutput) {
  const auto net = init_symmetric(8, 5, 3, Activation::relu(), 42);
  EXPECT_EQ(net.w.topRows(4), net.w.bottomRows(4));
  EXPECT_EQ(net.z.topRows(4), -net.z.bottomRows(4));
  EXPECT_TRUE((net.z.array().abs() == 1.0).all());
  const Matrix x = fixtures::gaussian_matrix(6, 5, 1);
  EXPECT_EQ(net.forward_batch(x).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(init_symmetric(8, 5, 3, Activation::relu(), 42), net);
  EXPECT_NE(init_symmetric(8, 5, 3, Activation::relu(), 43), net);
}

TEST(Init, OddOrZeroWidthIsRejected) {
  EXPECT_THROW(init_symmetric(7, 3, 1, Activation::relu(), 0), ConfigError);
  EXPECT_THROW(init_symmetric(0, 3, 1, Activation::relu(), 0), ConfigError);
}

TEST(Forward, MatchesDefinition) {
  const auto net = fixtures::random_net(6, 4, 2, Activation::of(ActivationKind::tanh), 3);
  const Vector x = fixtures::gaussian_matrix(4, 1, 5).col(0);
  Vector expect = Vector::Zero(2);
  for (std::size_t j = 0; j < 6; ++j) {
    const double pre = net.w.row(j).dot(x) / std::sqrt(4.0);
    expect += std::tanh(pre) * net.z.row(j).transpose();
  }
  expect /= std::sqrt(6.0);
  EXPECT_NEAR((net.forward(x) - expect).norm(), 0.0, 1e-14);
  Matrix xs(1, 4);
  xs.row(0) = x.transpose();
  EXPECT_NEAR((net.forward_batch(xs).row(0).transpose() - expect).norm(), 0.0, 1e-14);
}

TEST(Loss, L2AndCrossEntropyByHand) {
  const auto net = fixtures::random_net(4, 3, 1, Activation::relu(), 1);
  const Matrix x = fixtures::gaussian_matrix(5, 3, 2);
  const std::vector<int> y{1, -1, 1, 1, -1};
  const Matrix f = net.forward_batch(x);
  double l2 = 0;
  for (int i = 0; i < 5; ++i) l2 += 0.5 * std::pow(f(i, 0) - y[i], 2) / 5.0;
  EXPECT_NEAR(l2_loss(net, x, y), l2, 1e-14);

  const auto net3 = fixtures::random_net(4, 3, 3, Activation::relu(), 1);
  const std::vector<int> c{0, 2, 1, 1, 0};
  const Matrix g = net3.forward_batch(x);
  double ce = 0;
  for (int i = 0; i < 5; ++i) ce += (std::log(g.row(i).array().exp().sum()) - g(i, c[i])) / 5.0;
  EXPECT_NEAR(cross_entropy_loss(net3, x, c), ce, 1e-13);
  EXPECT_THROW(cross_entropy_loss(net3, x, y), Error);
}

TEST(Loss, CrossEntropyIsStableForLargeLogits) {
  auto net = fixtures::random_net(4, 3, 2, Activation::relu(), 1);
  net.z *= 1e4;
  const Matrix x = fixtures::gaussian_matrix(5, 3, 2);
  EXPECT_TRUE(std::isfinite(cross_entropy_loss(net, x, std::vector<int>{0, 1, 0, 1, 0})));
}

struct GradCase {
  Loss loss;
  Activation act;
  std::size_t o;
};

class GradientCheck : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const auto p = GetParam();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto net = fixtures::random_net(6, 5, p.o, p.act, seed);
    const Matrix x = fixtures::gaussian_matrix(7, 5, seed + 100);
    std::vector<int> y(7);
    std::vector<double> w(7);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 7; ++i) {
      y[i] = p.loss == Loss::l2 ? (rng() % 2 ? 1 : -1) : static_cast<int>(rng() % p.o);
      w[i] = 0.1 + static_cast<double>(rng() % 100) / 100.0;
    }
    const auto objective = [&] { return example_losses(net, p.loss, x, y).dot(Eigen::Map<const Vector>(w.data(), 7)); };
    const auto g = loss_gradient(net, p.loss, x, y, w);
    EXPECT_NEAR(g.loss, objective(), 1e-12);
    EXPECT_LE(fixtures::relative_error(g.w, fixtures::central_difference(net.w, objective)), 1e-6) << "seed " << seed;
    EXPECT_LE(fixtures::relative_error(g.z, fixtures::central_difference(net.z, objective)), 1e-6) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(
    Losses, GradientCheck,
    ::testing::Values(GradCase{Loss::l2, Activation::relu(), 1}, GradCase{Loss::l2, Activation::of(ActivationKind::tanh), 1},
                      GradCase{Loss::l2, Activation::of(ActivationKind::softplus), 1},
                      GradCase{Loss::l2, Activation::leaky(0.2), 1},
                      GradCase{Loss::cross_entropy, Activation::relu(), 3},
                      GradCase{Loss::cross_entropy, Activation::of(ActivationKind::erf), 4}));

TEST(Gradient, DefaultWeightsAreUniformMean) {
  const auto net = fixtures::random_net(4, 3, 1, Activation::relu(), 5);
  const Matrix x = fixtures::gaussian_matrix(4, 3, 6);
  const std::vector<int> y{1, -1, -1, 1};
  const std::vector<double> w(4, 0.25);
  const auto a = loss_gradient(net, Loss::l2, x, y);
  const auto b = loss_gradient(net, Loss::l2, x, y, w);
  EXPECT_NEAR((a.w - b.w).norm(), 0.0, 1e-15);
  EXPECT_NEAR(a.loss, l2_loss(net, x, y), 1e-15);
}

TEST(Gradient, StepUsesPreStepWeightsForBothLayers) {
  const auto net = fixtures::random_net(4, 3, 1, Activation::relu(), 5);
  const Matrix x = fixtures::gaussian_matrix(4, 3, 6);
  const std::vector<int> y{1, -1, -1, 1};
  const auto g = loss_gradient(net, Loss::l2, x, y);
  const auto next = grad_step(net, Loss::l2, x, y, 0.1);
  EXPECT_NEAR((next.w - (net.w - 0.1 * g.w)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((next.z - (net.z - 0.1 * g.z)).norm(), 0.0, 1e-15);
}

TEST(Predict, TiesAndSignConvention) {
  EXPECT_EQ(predict_label(Vector::Constant(1, 0.0)), 1);
  EXPECT_EQ(predict_label(Vector::Constant(1, -1e-300)), -1);
  Vector tie(3);
  tie << 0.5, 0.5, -1.0;
  EXPECT_EQ(predict_label(tie), 0);
  Matrix rows(2, 3);
  rows << 0, 1, 1, 2, 2, 2;
  EXPECT_EQ(predict_labels(rows), (std::vector<int>{1, 0}));
}

TEST(Outputs, LayerTags) {
  const auto net = fixtures::random_net(6, 4, 2, Activation::relu(), 8);
  const Matrix x = fixtures::gaussian_matrix(3, 4, 9);
  EXPECT_EQ(collect_outputs(net, x, LayerTag::last_layer_outputs).cols(), 2);
  const Matrix h = collect_outputs(net, x, LayerTag::penultimate_features);
  EXPECT_EQ(h.cols(), 6);
  EXPECT_NEAR((h * net.z - net.forward_batch(x)).norm(), 0.0, 1e-13);
  EXPECT_EQ(parse_layer_tag(to_string(LayerTag::penultimate_features)), LayerTag::penultimate_features);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = std::filesystem::temp_directory_path() / "spare_ckpt_test";
  for (const auto& act : {Activation::relu(), Activation::leaky(0.01)}) {
    const auto net = fixtures::random_net(6, 4, 2, act, 8);
    save_checkpoint(net, dir / "net.spnn");
    EXPECT_EQ(load_checkpoint(dir / "net.spnn"), net);
  }
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsForeignAndTruncatedFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "spare_ckpt_bad";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "bad.spnn", std::ios::binary) << "NOPE0000";
  }
  EXPECT_THROW(load_checkpoint(dir / "bad.spnn"), Error);
  save_checkpoint(fixtures::random_net(2, 2, 1, Activation::relu(), 1), dir / "ok.spnn");
  std::filesystem::resize_file(dir / "ok.spnn", std::filesystem::file_size(dir / "ok.spnn") - 3);
  EXPECT_THROW(load_checkpoint(dir / "ok.spnn"), Error);
  EXPECT_THROW(load_checkpoint(dir / "missing.spnn"), Error);
  std::filesystem::remove_all(dir);
}
