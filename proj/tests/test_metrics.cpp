#include "spare/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace spare;
using namespace spare::metrics;

TEST(Metrics, WorstGroupAndAverage) {
  const std::vector<int> preds{1, 1, 0, 0, 1, 0};
  const std::vector<int> labels{1, 1, 1, 0, 0, 0};
  const std::vector<GroupKey> groups{{1, 0}, {1, 0}, {1, 1}, {0, 0}, {0, 1}, {0, 1}};
  EXPECT_DOUBLE_EQ(worst_group_error(preds, labels, groups), 1.0);
  EXPECT_DOUBLE_EQ(average_accuracy(preds, labels), 4.0 / 6);
  const auto t = group_tallies(preds, labels, groups);
  EXPECT_EQ(t.at(GroupKey{0, 1}).correct, 1u);
  EXPECT_EQ(t.at(GroupKey{0, 1}).total, 2u);
}

TEST(Metrics, AdjustedAccuracyWeightsByTrainSizes) {
  const std::map<GroupKey, double> acc{{{0, 0}, 1.0}, {{0, 1}, 0.5}};
  EXPECT_DOUBLE_EQ(adjusted_average_accuracy(acc, {{{0, 0}, 90}, {{0, 1}, 10}}), 0.95);
  // Train groups missing from the evaluation do not enter the mixture.
  EXPECT_DOUBLE_EQ(adjusted_average_accuracy(acc, {{{0, 0}, 90}, {{0, 1}, 10}, {{1, 1}, 100}}), 0.95);
  EXPECT_THROW(adjusted_average_accuracy(acc, {{{0, 0}, 90}}), Error);
}

TEST(Metrics, AdjustedAccuracyIsConvexCombination) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::map<GroupKey, double> acc;
    std::map<GroupKey, std::size_t> sizes;
    const int groups = 1 + rep % 6;
    for (int g = 0; g < groups; ++g) {
      acc[{g, 0}] = u(rng);
      sizes[{g, 0}] = 1 + rng() % 1000;
    }
    double lo = 1, hi = 0;
    for (const auto& [g, a] : acc) lo = std::min(lo, a), hi = std::max(hi, a);
    const double v = adjusted_average_accuracy(acc, sizes);
    EXPECT_GE(v, lo - 1e-15);
    EXPECT_LE(v, hi + 1e-15);
    for (auto& [g, s] : sizes) s = 7;
    double mean = 0;
    for (const auto& [g, a] : acc) mean += a / groups;
    EXPECT_NEAR(adjusted_average_accuracy(acc, sizes), mean, 1e-14);
  }
}

TEST(Metrics, MinorityRecallAndConfusions) {
  const std::vector<bool> inferred{true, false, true, false, true};
  const std::vector<bool> truth{true, true, false, false, true};
  EXPECT_DOUBLE_EQ(*minority_recall(inferred, truth), 2.0 / 3);
  EXPECT_EQ(minority_in_majority(inferred, truth), 1u);
  EXPECT_DOUBLE_EQ(*majority_in_minority(inferred, truth), 0.5);
  const std::vector<bool> none(5, false);
  EXPECT_FALSE(minority_recall(inferred, none).has_value());
}

TEST(CramersV, KnownTable) {
  Eigen::MatrixXd t(2, 2);
  t << 8, 2, 2, 8;
  const auto v = cramers_v_table(t);
  EXPECT_NEAR(v.value, 0.6, 1e-15);
  EXPECT_FALSE(v.degenerate);
}

TEST(CramersV, PerfectAndIndependentAssociation) {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  const std::vector<int> b{5, 5, 7, 7, 9, 9};
  EXPECT_NEAR(cramers_v(a, b).value, 1.0, 1e-15);
  Eigen::MatrixXd t(2, 3);
  t << 2, 4, 6, 1, 2, 3;
  EXPECT_NEAR(cramers_v_table(t).value, 0.0, 1e-15);
}

TEST(CramersV, MatchesHandComputedChiSquare) {
  Eigen::MatrixXd t(2, 3);
  t << 10, 20, 30, 25, 5, 10;
  const double n = t.sum();
  double chi = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) {
      const double e = t.row(i).sum() * t.col(j).sum() / n;
      chi += (t(i, j) - e) * (t(i, j) - e) / e;
    }
  EXPECT_NEAR(cramers_v_table(t).value, std::sqrt(chi / n), 1e-14);
}

TEST(CramersV, DegenerateInputIsFlagged) {
  const std::vector<int> a{0, 0, 0};
  const std::vector<int> b{1, 2, 3};
  const auto v = cramers_v(a, b);
  EXPECT_TRUE(v.degenerate);
  EXPECT_EQ(v.value, 0.0);
}

TEST(Evaluate, ReportOverDataset) {
  datagen::Dataset d;
  d.labels = {1, 1, -1, -1};
  d.groups = {{1, 1}, {1, -1}, {-1, -1}, {-1, 1}};
  d.ids = {0, 1, 2, 3};
  d.x = Matrix::Zero(4, 1);
  const std::vector<int> preds{1, -1, -1, -1};
  const auto r = evaluate(preds, d, {{{1, 1}, 45}, {{1, -1}, 5}, {{-1, -1}, 45}, {{-1, 1}, 5}});
  EXPECT_DOUBLE_EQ(r.worst_group_accuracy, 0.0);
  EXPECT_DOUBLE_EQ(r.average_accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.adjusted_average_accuracy, 0.95);
  EXPECT_EQ(group_name({-1, 1}), "g(-1,1)");
}
