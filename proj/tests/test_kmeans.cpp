#include "spare/kmeans.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace spare;
using namespace spare::cluster;

namespace {

Matrix blobs(const std::vector<std::size_t>& sizes, double spread, std::uint64_t seed, std::size_t dim = 2) {
  std::size_t n = 0;
  for (auto s : sizes) n += s;
  Matrix x = fixtures::gaussian_matrix(n, dim, seed, spread);
  std::size_t row = 0;
  for (std::size_t b = 0; b < sizes.size(); ++b)
    for (std::size_t i = 0; i < sizes[b]; ++i, ++row) x(row, 0) += 10.0 * static_cast<double>(b);
  return x;
}

}  // namespace

TEST(KMeans, RecoversSeparatedBlobs) {
  const Matrix x = blobs({30, 20, 10}, 0.5, 1);
  const auto r = kmeans(x, 3, 7);
  std::set<int> ids(r.assignment.begin(), r.assignment.end());
  EXPECT_EQ(ids.size(), 3u);
  for (std::size_t i = 1; i < 30; ++i) EXPECT_EQ(r.assignment[i], r.assignment[0]);
  for (std::size_t i = 31; i < 50; ++i) EXPECT_EQ(r.assignment[i], r.assignment[30]);
  EXPECT_NE(r.assignment[0], r.assignment[30]);
}

TEST(KMeans, ObjectiveNeverIncreasesAndMatchesAssignment) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix x = fixtures::gaussian_matrix(80, 3, seed);
    const auto r = kmeans(x, 4, seed);
    for (std::size_t t = 1; t < r.history.size(); ++t) EXPECT_LE(r.history[t], r.history[t - 1] + 1e-12);
    double obj = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) obj += (x.row(i) - r.centroids.row(r.assignment[i])).squaredNorm();
    EXPECT_NEAR(obj, r.objective, 1e-9);
    // Every point sits at its nearest centroid.
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index c = 0; c < r.centroids.rows(); ++c)
        EXPECT_LE((x.row(i) - r.centroids.row(r.assignment[i])).squaredNorm(), (x.row(i) - r.centroids.row(c)).squaredNorm() + 1e-12);
  }
}

TEST(KMeans, SameSeedSameResult) {
  const Matrix x = fixtures::gaussian_matrix(60, 2, 3);
  EXPECT_EQ(kmeans(x, 3, 5).assignment, kmeans(x, 3, 5).assignment);
}

TEST(KMeans, NoEmptyClustersWithDuplicates) {
  Matrix x(6, 1);
  x << 0, 0, 0, 0, 1, 1;
  const auto r = kmeans(x, 3, 1);
  std::set<int> ids(r.assignment.begin(), r.assignment.end());
  EXPECT_EQ(ids.size(), 3u);
}

TEST(KMeans, InvalidK) {
  const Matrix x = fixtures::gaussian_matrix(3, 2, 3);
  EXPECT_THROW(kmeans(x, 0, 1), Error);
  EXPECT_THROW(kmeans(x, 4, 1), Error);
}

TEST(Silhouette, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix x = fixtures::gaussian_matrix(25 + seed, 3, seed);
    std::vector<int> a(x.rows());
    std::mt19937_64 rng(seed);
    for (auto& v : a) v = static_cast<int>(rng() % 3);
    a[0] = 0;
    a[1] = 1;
    a[2] = 2;
    const auto s = silhouette(x, a);
    const auto b = fixtures::brute_silhouette(x, a);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(s.scores[i], b[i], 1e-12);
    double mean = 0;
    for (double v : b) mean += v / static_cast<double>(b.size());
    EXPECT_NEAR(s.mean, mean, 1e-12);
  }
}

TEST(Silhouette, DegenerateAndSingletonCases) {
  Matrix x(3, 1);
  x << 0, 1, 5;
  const std::vector<int> one{0, 0, 0};
  const auto s = silhouette(x, one);
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.mean, 0.0);
  const std::vector<int> split{0, 0, 1};
  EXPECT_EQ(silhouette(x, split).scores[2], 0.0);
  Matrix same(4, 1);
  same << 2, 2, 2, 2;
  const std::vector<int> halves{0, 0, 1, 1};
  EXPECT_EQ(silhouette(same, halves).mean, 0.0);
}

TEST(ChooseK, PicksTrueBlobCount) {
  const Matrix x = blobs({40, 30, 20}, 0.3, 4);
  const auto c = choose_k(x, 2, 5, 1);
  EXPECT_EQ(c.k, 3u);
  EXPECT_EQ(c.candidates, (std::vector<std::size_t>{2, 3, 4, 5}));
  EXPECT_FALSE(c.warning);
}

TEST(ChooseK, TiesGoToSmallestK) {
  // Four identical points: every k scores 0.
  Matrix x = Matrix::Zero(4, 2);
  const auto c = choose_k(x, 2, 3, 1);
  EXPECT_EQ(c.k, 2u);
}

TEST(ChooseK, TooFewPointsWarns) {
  const Matrix x = fixtures::gaussian_matrix(2, 2, 1);
  const auto c = choose_k(x, 2, 5, 1);
  EXPECT_TRUE(c.warning);
  EXPECT_EQ(c.k, 1u);
  EXPECT_TRUE(c.candidates.empty());
}

TEST(TwoMeans1d, ExactSplitByExhaustion) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> v(15);
    for (auto& x : v) x = g(rng) + (rng() % 2 ? 4 : 0);
    const auto a = two_means_1d(v);
    // Brute force over thresholds between sorted values.
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t cut = 1; cut < s.size(); ++cut) {
      double m0 = 0, m1 = 0;
      for (std::size_t i = 0; i < cut; ++i) m0 += s[i] / cut;
      for (std::size_t i = cut; i < s.size(); ++i) m1 += s[i] / (s.size() - cut);
      double sse = 0;
      for (std::size_t i = 0; i < s.size(); ++i) sse += std::pow(s[i] - (i < cut ? m0 : m1), 2);
      best = std::min(best, sse);
    }
    double c0 = 0, c1 = 0, n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < v.size(); ++i) (a[i] == 0 ? c0 : c1) += v[i], (a[i] == 0 ? n0 : n1) += 1;
    c0 /= n0;
    c1 /= n1;
    EXPECT_LT(c0, c1);
    double sse = 0;
    for (std::size_t i = 0; i < v.size(); ++i) sse += std::pow(v[i] - (a[i] == 0 ? c0 : c1), 2);
    EXPECT_NEAR(sse, best, 1e-10);
  }
}

TEST(TwoMeans1d, EqualValuesStayTogether) {
  const std::vector<double> v{1, 1, 1};
  EXPECT_EQ(two_means_1d(v), (std::vector<int>{0, 0, 0}));
  const std::vector<double> w{0, 0, 3, 3, 3};
  EXPECT_EQ(two_means_1d(w), (std::vector<int>{0, 0, 1, 1, 1}));
}
