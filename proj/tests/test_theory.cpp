#include "spare/theory.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace spare;
using namespace spare::theory;

TEST(EarlyWindow, GeometricDistinctIntegersUpToHalfSqrt) {
  const auto w = early_window(100, 0.05);
  ASSERT_FALSE(w.empty());
  EXPECT_EQ(w.front(), 1u);
  EXPECT_EQ(w.back(), 22u);  // round(0.5 sqrt(2000))
  EXPECT_TRUE(std::is_sorted(w.begin(), w.end()));
  EXPECT_EQ(std::set<std::size_t>(w.begin(), w.end()).size(), w.size());
  EXPECT_LE(w.size(), 12u);
  EXPECT_EQ(early_window(4, 16.0), std::vector<std::size_t>{1});
}

TEST(Phase2Steps, RoundedDLogDOverEta) {
  EXPECT_EQ(phase2_steps(400, 10.0, 1.0), static_cast<std::size_t>(std::lround(400 * std::log(400.0) / 10.0)));
  EXPECT_EQ(phase2_steps(100, 0.05, 0.5), static_cast<std::size_t>(std::lround(0.5 * 100 * std::log(100.0) / 0.05)));
}

TEST(FitSlope, ThroughTheOrigin) {
  EXPECT_DOUBLE_EQ(fit_slope_through_origin({1, 2, 3}, {2, 4, 6}), 2.0);
  // sum t y / sum t^2
  EXPECT_DOUBLE_EQ(fit_slope_through_origin({1, 2}, {1, 3}), 7.0 / 5.0);
  EXPECT_DOUBLE_EQ(fit_slope_through_origin({4}, {2}), 0.5);
  EXPECT_THROW(fit_slope_through_origin({}, {}), Error);
  EXPECT_THROW(fit_slope_through_origin({0, 0}, {1, 2}), Error);
}

TEST(PredictedSlopes, HandComputedForUnbalancedGroups) {
  const auto bank = fixtures::binary_bank(20, 1.5, 2.0, 0.0, 0.0, 0.0);
  std::vector<datagen::GroupSpec> g{{1, 1, 30, true}, {1, -1, 10, false}, {-1, -1, 50, true}, {-1, 1, 10, false}};
  const auto data = datagen::generate_synthetic(bank, g, 0);
  const double eta = 0.1, zeta = 0.5, n = 100, d = 20;
  const auto s = predicted_slopes(data, eta, zeta);
  const double base = 2 * eta * zeta * zeta / (n * d);
  EXPECT_NEAR(s.at("core:1"), base * 2.25 * 40, 1e-15);
  EXPECT_NEAR(s.at("core:-1"), -base * 2.25 * 60, 1e-15);
  EXPECT_NEAR(s.at("spurious:1"), base * 4.0 * (30 - 10), 1e-15);
  EXPECT_NEAR(s.at("spurious:-1"), base * 4.0 * (10 - 50), 1e-15);
}

TEST(Kappa, HandComputed) {
  const auto bank = fixtures::binary_bank(20, 1.0, 2.0, 0.1, 0.3, 0.0);
  std::vector<datagen::GroupSpec> g{{1, 1, 30, true}, {1, -1, 10, false}, {-1, -1, 50, true}, {-1, 1, 10, false}};
  const auto data = datagen::generate_synthetic(bank, g, 0);
  const double n = 100;
  const double core = std::sqrt(40.0 * 40 * 0.01 * 1 + 60.0 * 60 * 0.01 * 1) / n;
  const double spur = std::sqrt(20.0 * 20 * 0.09 * 4 + 40.0 * 40 * 0.09 * 4) / n;
  EXPECT_NEAR(kappa(data), core + spur, 1e-14);
}

TEST(Separability, PerfectAndRandomCases) {
  const std::vector<double> out{1.0, 1.1, 0.9, 3.0, -1.0, -1.1, -4.0, -3.9};
  const std::vector<int> labels{1, 1, 1, 1, -1, -1, -1, -1};
  const std::vector<bool> major{true, true, true, false, true, true, false, false};
  const auto s = separability_score(out, labels, major);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(*s[0].score, 1.0);
  EXPECT_DOUBLE_EQ(*s[1].score, 1.0);
  EXPECT_DOUBLE_EQ(*s[1].minority_recall, 1.0);  // tie in size: cluster 1
  const std::vector<double> flat{0.0, 0.0, 0.0, 0.0};
  const std::vector<int> one{1, 1, 1, 1};
  const std::vector<bool> half{true, false, true, false};
  EXPECT_DOUBLE_EQ(*separability_score(flat, one, half)[0].score, 0.5);
  const std::vector<double> single{2.0};
  EXPECT_FALSE(separability_score(single, std::vector<int>{1}, {true})[0].score.has_value());
}

TEST(Phase1, SlopesOnSmallProblemAreNearPrediction) {
  const auto bank = fixtures::binary_bank(100, 1.0, 2.0, 0.1, 0.1, 1.0);
  const auto data = datagen::generate_synthetic(bank, fixtures::binary_groups(475, 25), 0);
  train::TrainConfig tc;
  tc.eta = 0.05;
  TheoryConfig th;
  const auto r = phase1_check(data, {1000, model::Activation::relu(), 0}, tc, th);
  EXPECT_NEAR(r.zeta, 0.5, 1e-10);
  EXPECT_EQ(r.steps, early_window(100, 0.05));
  const auto& core = r.slope("core:1");
  EXPECT_GT(core.fitted, 0.0);
  EXPECT_LT(*core.relative_error, 0.3);
  EXPECT_LT(r.slope("spurious:-1").fitted, 0.0);
  EXPECT_GT(r.noise_floor, 0.0);
}

TEST(Phase1, RejectsNonBinaryData) {
  datagen::NoiseLevels s;
  const auto bank = datagen::build_feature_bank(10, {{0, 1.0}, {1, 1.0}}, {{0, 1.0}}, s);
  std::vector<datagen::GroupSpec> g{{0, 0, 5, true}, {1, 0, 5, true}};
  const auto data = datagen::generate_synthetic(bank, g, 0);
  EXPECT_THROW(phase1_check(data, {10, model::Activation::relu(), 0}, {}, {}), Error);
}

TEST(TheoryConfig, Validation) {
  TheoryConfig c;
  c.c2 = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.c2 = 1;
  c.alpha = 0.3;
  EXPECT_THROW(c.validate(), ConfigError);
}
