#include "spare/kmeans.hpp"

#include "spare/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace spare::cluster {

namespace {

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

Matrix plus_plus_init(const Matrix& points, std::size_t k, Rng& rng) {
  const auto n = points.rows();
  Matrix centroids(static_cast<Eigen::Index>(k), points.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centroids.row(0) = points.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = sq_dist(points, i, centroids, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      double r = unit(rng) * total;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2[static_cast<std::size_t>(i)];
        if (r < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(points, i, centroids, static_cast<Eigen::Index>(c)));
  }
  return centroids;
}

double assign(const Matrix& points, const Matrix& centroids, std::vector<int>& assignment) {
  double objective = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double dist = sq_dist(points, i, centroids, c);
      if (dist < best_d) {
        best_d = dist;
        best = static_cast<int>(c);
      }
    }
    assignment[static_cast<std::size_t>(i)] = best;
    objective += best_d;
  }
  return objective;
}

// Leaves every cluster with at least one point when k <= n.
void repair_empty(const Matrix& points, const Matrix& centroids, std::vector<int>& assignment, std::size_t k) {
  for (;;) {
    std::vector<std::size_t> sizes(k, 0);
    for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
    const auto empty = std::find(sizes.begin(), sizes.end(), 0u);
    if (empty == sizes.end()) return;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const int a = assignment[static_cast<std::size_t>(i)];
      if (sizes[static_cast<std::size_t>(a)] < 2) continue;
      const double dist = sq_dist(points, i, centroids, a);
      if (dist > far_d) {
        far_d = dist;
        far = i;
      }
    }
    if (far < 0) return;
    assignment[static_cast<std::size_t>(far)] = static_cast<int>(empty - sizes.begin());
  }
}

Matrix update(const Matrix& points, const std::vector<int>& assignment, const Matrix& previous) {
  Matrix sums = Matrix::Zero(previous.rows(), previous.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(previous.rows()), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const int a = assignment[static_cast<std::size_t>(i)];
    sums.row(a) += points.row(i);
    ++counts[static_cast<std::size_t>(a)];
  }
  for (Eigen::Index c = 0; c < sums.rows(); ++c) {
    const auto cnt = counts[static_cast<std::size_t>(c)];
    sums.row(c) = cnt > 0 ? Eigen::RowVectorXd(sums.row(c) / static_cast<double>(cnt)) : Eigen::RowVectorXd(previous.row(c));
  }
  return sums;
}

double wcss(const Matrix& points, const Matrix& centroids, const std::vector<int>& assignment) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) s += sq_dist(points, i, centroids, assignment[static_cast<std::size_t>(i)]);
  return s;
}

KMeansResult lloyd(const Matrix& points, std::size_t k, Rng& rng, const KMeansOptions& options) {
  KMeansResult r;
  r.assignment.assign(static_cast<std::size_t>(points.rows()), 0);
  r.centroids = plus_plus_init(points, k, rng);
  for (std::size_t it = 0; it < std::max<std::size_t>(options.max_iter, 1); ++it) {
    assign(points, r.centroids, r.assignment);
    repair_empty(points, r.centroids, r.assignment, k);
    const Matrix next = update(points, r.assignment, r.centroids);
    r.history.push_back(wcss(points, next, r.assignment));
    const double shift = (next - r.centroids).rowwise().norm().maxCoeff();
    r.centroids = next;
    r.iterations = it + 1;
    if (shift < options.tol) break;
  }
  r.objective = r.history.back();
  return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) throw Error("k-means needs at least one point");
  if (k == 0) throw Error("k-means needs k >= 1");
  if (k > n) throw Error("k-means with k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " points");
  Rng rng = make_rng(seed, Stream::kmeans, k);
  KMeansResult best;
  for (std::size_t r = 0; r < std::max<std::size_t>(options.n_init, 1); ++r) {
    KMeansResult run = lloyd(points, k, rng, options);
    if (r == 0 || run.objective < best.objective) best = std::move(run);
  }
  return best;
}

Silhouette silhouette(const Matrix& points, std::span<const int> assignment) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (assignment.size() != n) throw Error("silhouette: assignment length does not match point count");
  Silhouette s;
  s.scores.assign(n, 0.0);
  if (n == 0) {
    s.degenerate = true;
    return s;
  }
  const int k = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignment) {
    if (a < 0) throw Error("silhouette: negative cluster id");
    ++sizes[static_cast<std::size_t>(a)];
  }
  const auto nonempty = std::count_if(sizes.begin(), sizes.end(), [](std::size_t c) { return c > 0; });
  if (nonempty < 2) {
    s.degenerate = true;
    return s;
  }
  std::vector<double> sum_to(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum_to[static_cast<std::size_t>(assignment[j])] +=
          (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
    }
    const auto own = static_cast<std::size_t>(assignment[i]);
    if (sizes[own] < 2) continue;
    const double a = sum_to[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sizes.size(); ++c)
      if (c != own && sizes[c] > 0) b = std::min(b, sum_to[c] / static_cast<double>(sizes[c]));
    const double denom = std::max(a, b);
    s.scores[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  s.mean = std::accumulate(s.scores.begin(), s.scores.end(), 0.0) / static_cast<double>(n);
  return s;
}

KChoice choose_k(const Matrix& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                 const KMeansOptions& options) {
  if (k_min == 0 || k_max < k_min) throw ConfigError("k range must satisfy 1 <= k_min <= k_max");
  const auto n = static_cast<std::size_t>(points.rows());
  KChoice choice;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = std::max<std::size_t>(k_min, 2); k <= k_max && k < n; ++k) {
    const auto km = kmeans(points, k, seed, options);
    const double score = silhouette(points, km.assignment).mean;
    choice.candidates.push_back(k);
    choice.mean_silhouette.push_back(score);
    if (score > best + kSilhouetteTieTolerance) {
      best = score;
      choice.k = k;
    }
  }
  if (choice.candidates.empty()) {
    choice.k = 1;
    choice.warning = true;
  }
  return choice;
}

std::vector<int> two_means_1d(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<int> out(n, 0);
  if (n < 2) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = values[order[i]];
    prefix[i + 1] = prefix[i] + v;
    prefix_sq[i + 1] = prefix_sq[i] + v * v;
  }
  auto sse = [&](std::size_t a, std::size_t b) {  // half-open [a, b)
    const double cnt = static_cast<double>(b - a);
    const double s = prefix[b] - prefix[a];
    return (prefix_sq[b] - prefix_sq[a]) - s * s / cnt;
  };
  std::size_t best_split = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t split = 1; split < n; ++split) {
    if (values[order[split]] == values[order[split - 1]]) continue;  // never split equal values
    const double cost = sse(0, split) + sse(split, n);
    if (cost < best) {
      best = cost;
      best_split = split;
    }
  }
  if (best_split == 0) return out;
  for (std::size_t i = best_split; i < n; ++i) out[order[i]] = 1;
  return out;
}

}  // namespace spare::cluster
