#include "spare/linear_proxy.hpp"
#include "spare/quadrature.hpp"
#include "spare/trainer.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <boost/math/constants/constants.hpp>

#include <filesystem>

using namespace spare;
using namespace spare::linear;
using model::Activation;
using model::ActivationKind;

namespace {

double monte_carlo(const std::function<double(double)>& h, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += h(g(rng));
  return s / static_cast<double>(n);
}

}  // namespace

TEST(Quadrature, HermiteRuleIntegratesGaussianMoments) {
  const auto rule = quad::gauss_hermite(20);
  double wsum = 0;
  for (double w : rule.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-13);
  // E[g^{2k}] = (2k - 1)!!
  double dfact = 1;
  for (int k = 1; k < 20; ++k) {
    dfact *= 2 * k - 1;
    double m = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) m += rule.weights[i] * std::pow(rule.nodes[i], 2 * k);
    EXPECT_NEAR(m / dfact, 1.0, 1e-10) << "k=" << k;
    double odd = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) odd += rule.weights[i] * std::pow(rule.nodes[i], 2 * k - 1);
    EXPECT_NEAR(odd, 0.0, 1e-9 * dfact);
  }
}

TEST(Quadrature, SplitRuleHandlesKinks) {
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * boost::math::constants::pi<double>());
  EXPECT_NEAR(quad::gaussian_expectation_split([](double g) { return std::max(g, 0.0); }), inv_sqrt_2pi, 1e-13);
  EXPECT_NEAR(quad::gaussian_expectation_split([](double g) { return std::abs(g); }), 2 * inv_sqrt_2pi, 1e-13);
  EXPECT_NEAR(quad::gaussian_expectation_split([](double g) { return g < 0 ? 1.0 : 0.0; }), 0.5, 1e-13);
}

TEST(PsiConstants, ReluClosedForms) {
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * boost::math::constants::pi<double>());
  const auto k = activation_constants(Activation::relu(), 2.0);
  EXPECT_NEAR(k.zeta, 0.5, 1e-10);
  EXPECT_NEAR(k.theta0, inv_sqrt_2pi, 1e-10);
  EXPECT_NEAR(k.theta1, inv_sqrt_2pi, 1e-10);
  EXPECT_NEAR(k.theta2, 0.0, 1e-10);
  EXPECT_NEAR(k.nu, 2.0 * inv_sqrt_2pi, 1e-10);
}

TEST(PsiConstants, LeakyReluClosedForms) {
  const double a = 0.2;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * boost::math::constants::pi<double>());
  const auto k = activation_constants(Activation::leaky(a), 1.0);
  EXPECT_NEAR(k.zeta, (1 + a) / 2, 1e-10);
  EXPECT_NEAR(k.theta0, (1 - a) * inv_sqrt_2pi, 1e-10);
  EXPECT_NEAR(k.theta2, 0.0, 1e-10);
}

TEST(PsiConstants, SmoothActivationsMatchMonteCarlo) {
  for (auto kind : {ActivationKind::tanh, ActivationKind::softplus, ActivationKind::erf}) {
    const auto act = Activation::of(kind);
    const auto k = activation_constants(act, 1.0);
    const std::size_t n = 2'000'000;
    const double tol = 5e-3;
    EXPECT_NEAR(k.zeta, monte_carlo([&](double g) { return act.derivative(g); }, n, 1), tol) << act.name();
    EXPECT_NEAR(k.theta0, monte_carlo([&](double g) { return act.value(g); }, n, 2), tol) << act.name();
    EXPECT_NEAR(k.theta1, monte_carlo([&](double g) { return g * act.derivative(g); }, n, 3), tol) << act.name();
    EXPECT_NEAR(k.theta2, monte_carlo([&](double g) { return (g * g * g / 2 - g) * act.derivative(g); }, n, 4), 3 * tol)
        << act.name();
  }
  const auto id = activation_constants(Activation::of(ActivationKind::identity), 1.0);
  EXPECT_NEAR(id.zeta, 1.0, 1e-12);
  EXPECT_NEAR(id.theta0, 0.0, 1e-12);
  EXPECT_NEAR(id.theta1, 0.0, 1e-12);
  EXPECT_NEAR(id.theta2, 0.0, 1e-12);
}

TEST(Psi, LayoutAndNormTerm) {
  PsiConstants k{0.5, 0.3, 0.1, 0.2, 0.4};
  Vector x(4);
  x << 2, 0, 0, 0;  // |x| / sqrt(4) = 1
  const Vector p = psi(x, k);
  ASSERT_EQ(p.size(), 6);
  EXPECT_NEAR(p(0), std::sqrt(2.0 / 4) * 0.5 * 2, 1e-15);
  EXPECT_NEAR(p(4), std::sqrt(3.0 / 8) * 0.3, 1e-15);
  EXPECT_NEAR(p(5), 0.1, 1e-15);
  x(0) = 4;  // r = 2
  EXPECT_NEAR(psi(x, k)(5), 0.1 + 0.2 + 0.4, 1e-15);
  Matrix xs(2, 4);
  xs.row(0) = x.transpose();
  xs.row(1).setOnes();
  EXPECT_NEAR((psi_matrix(xs, k).row(0).transpose() - psi(x, k)).norm(), 0.0, 0.0);
}

TEST(Psi, TraceTermUsesUncenteredSecondMoment) {
  Matrix x(2, 2);
  x << 1, 1, 1, 1;  // Sigma = [[1,1],[1,1]], Tr[Sigma^2] = 4
  EXPECT_NEAR(covariance_trace_term(x), std::sqrt(4.0 / 2.0), 1e-15);
}

TEST(LinearModel, GradientStepIsLeastSquaresDescent) {
  const Matrix p = fixtures::gaussian_matrix(9, 6, 3);
  const std::vector<int> y{1, -1, 1, 1, -1, 1, -1, -1, 1};
  auto m = LinearModel::zeros(4);
  m.beta_data << 0.1, -0.2, 0.3, 0.0;
  m.beta_bias = 0.5;
  const auto next = linear_gd_step(m, p, y, 0.2);
  Vector yv(9);
  for (int i = 0; i < 9; ++i) yv(i) = y[i];
  const Vector expect = m.stacked() - 0.2 / 9 * p.transpose() * (p * m.stacked() - yv);
  EXPECT_NEAR((next.stacked() - expect).norm(), 0.0, 1e-15);
  EXPECT_EQ(LinearModel::from_stacked(expect).beta_norm, expect(5));
}

TEST(LinearModel, ClosedFormIsMinimumNormSolution) {
  const Matrix p = fixtures::gaussian_matrix(5, 8, 4);  // underdetermined
  const std::vector<int> y{1, -1, 1, 1, -1};
  const auto sol = linear_closed_form(p, y);
  Vector yv(5);
  for (int i = 0; i < 5; ++i) yv(i) = y[i];
  EXPECT_NEAR((p * sol.stacked() - yv).norm(), 0.0, 1e-12);
  const Matrix pinv = p.transpose() * (p * p.transpose()).inverse();
  EXPECT_NEAR((sol.stacked() - pinv * yv).norm(), 0.0, 1e-12);
}

TEST(LinearModel, GradientDescentConvergesToClosedForm) {
  const Matrix p = fixtures::gaussian_matrix(20, 5, 5);
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) y[i] = i % 3 ? 1 : -1;
  auto m = LinearModel::zeros(3);
  for (int t = 0; t < 3000; ++t) m = linear_gd_step(m, p, y, 0.5);
  EXPECT_NEAR((m.stacked() - linear_closed_form(p, y).stacked()).norm(), 0.0, 1e-9);
}

TEST(LinearModel, BiasRemovedClosedFormZeroesExtraColumns) {
  const Matrix p = fixtures::gaussian_matrix(12, 6, 6);
  std::vector<int> y(12, 1);
  y[3] = -1;
  const auto sol = linear_closed_form(p, y, true);
  EXPECT_EQ(sol.beta_bias, 0.0);
  EXPECT_EQ(sol.beta_norm, 0.0);
  const Matrix pd = p.leftCols(4);
  Vector yv(12);
  for (int i = 0; i < 12; ++i) yv(i) = y[i];
  const Vector ls = pd.colPivHouseholderQr().solve(yv);
  EXPECT_NEAR((sol.beta_data - ls).norm(), 0.0, 1e-10);
}

TEST(LinearModel, RankDeficientColumnsGetNoWeight) {
  Matrix p = fixtures::gaussian_matrix(10, 5, 7);
  p.col(4) = p.col(3);
  std::vector<int> y(10, 1);
  const auto sol = linear_closed_form(p, y);
  EXPECT_NEAR(sol.beta_bias, sol.beta_norm, 1e-10);
}

TEST(Coupling, EarlyNetworkTracksLinearProxy) {
  const std::size_t d = 200;
  const auto bank = fixtures::binary_bank(d, 1.0, 2.0, 0.1, 0.1, 1.0);
  const auto data = datagen::generate_synthetic(bank, fixtures::binary_groups(200, 20), 0);
  auto net = model::init_symmetric(2000, d, 1, Activation::relu(), 0);
  const auto k = activation_constants(Activation::relu(), covariance_trace_term(data.x));
  const Matrix p = psi_matrix(data.x, k);
  auto lin = LinearModel::zeros(d);
  train::TrainConfig c;
  c.eta = 0.05;
  c.steps = 1;
  for (int t = 0; t < 30; ++t) {
    train::train(net, data.x, data.labels, c);
    lin = linear_gd_step(lin, p, data.labels, c.eta);
  }
  const Vector fn = net.forward_batch(data.x).col(0);
  const Vector fl = linear_forward_batch(lin, p);
  EXPECT_LT((fn - fl).squaredNorm() / static_cast<double>(data.size()), 1e-3);
  const auto gaps = feature_gap(net, lin, bank, data.group_table, k);
  EXPECT_EQ(gaps.size(), 4u);
  EXPECT_LT(gaps.at(core_label(1)), 0.05);
}

TEST(Coupling, GapRequiresMatchingSteps) {
  OutputTrace a, b;
  a.add(1, Vector::Ones(3));
  b.add(1, Vector::Zero(3));
  EXPECT_EQ(coupling_gap(a, b), std::vector<double>{1.0});
  b.add(3, Vector::Zero(3));
  EXPECT_THROW(coupling_gap(a, b), Error);
}

TEST(LinearModel, SaveLoadRoundTrip) {
  auto m = LinearModel::zeros(3);
  m.beta_data << 1, 2, 3;
  m.beta_bias = -1;
  m.beta_norm = 0.5;
  const PsiConstants k{0.5, 0.1, 0.2, 0.3, 0.0};
  const auto path = std::filesystem::temp_directory_path() / "spare_lin.splm";
  save_linear(m, k, path);
  const auto [m2, k2] = load_linear(path);
  EXPECT_EQ(m2.stacked(), m.stacked());
  EXPECT_EQ(k2.zeta, k.zeta);
  EXPECT_EQ(k2.theta1, k.theta1);
  std::filesystem::remove(path);
}
