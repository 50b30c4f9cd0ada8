#pragma once

#include "spare/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace spare::cluster {

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-10;     // stop once every centroid moves less than this
  std::size_t n_init = 3;  // k-means++ restarts; the lowest objective wins
};

struct KMeansResult {
  std::vector<int> assignment;   // one id in [0, k) per point
  Matrix centroids;              // k x p
  double objective = 0.0;        // within-cluster sum of squares
  std::vector<double> history;   // objective after every assignment pass of the winning restart
  std::size_t iterations = 0;
};

/// Lloyd iteration from a k-means++ start. Points are rows. An empty cluster
/// takes the point farthest from its current centroid among clusters with
/// more than one point. Nearest-centroid ties go to the lower id.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

struct Silhouette {
  std::vector<double> scores;  // s(i) in [-1, 1]; 0 for points in singleton clusters
  double mean = 0.0;
  bool degenerate = false;  // fewer than two non-empty clusters; mean is 0
};

/// Euclidean silhouette: s(i) = (b - a) / max(a, b), a the mean distance to
/// the rest of the own cluster, b the smallest mean distance to another
/// cluster. s(i) = 0 when a = b = 0.
Silhouette silhouette(const Matrix& points, std::span<const int> assignment);

struct KChoice {
  std::size_t k = 1;
  std::vector<std::size_t> candidates;
  std::vector<double> mean_silhouette;  // aligned with candidates
  bool warning = false;                 // too few points for any candidate
};

inline constexpr double kSilhouetteTieTolerance = 1e-12;

/// Candidate k maximizing mean silhouette; ties within 1e-12 go to the
/// smallest k. Candidates need 2 <= k < #points.
KChoice choose_k(const Matrix& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                 const KMeansOptions& options = {});

/// Exact 2-means of scalars: the split of the sorted values with least
/// within-cluster sum of squares. Cluster 0 holds the lower values. When all
/// values coincide every point lands in cluster 0.
std::vector<int> two_means_1d(std::span<const double> values);

}  // namespace spare::cluster
