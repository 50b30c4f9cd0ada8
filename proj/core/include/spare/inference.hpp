#pragma once

#include "spare/datagen.hpp"
#include "spare/kmeans.hpp"
#include "spare/model.hpp"

#include <cstdint>
#include <vector>

namespace spare::inference {

struct InferenceOptions {
  std::size_t k_min = 2;
  std::size_t k_max = 5;
  std::uint64_t seed = 0;
  int lambda_override = 0;  // > 0 replaces the silhouette rule for every class
  cluster::KMeansOptions kmeans;
};

struct ClassClusters {
  int class_id = 0;
  std::vector<std::size_t> rows;  // dataset rows of this class, ascending
  std::size_t k = 1;
  std::vector<int> assignment;    // aligned with rows
  Matrix centroids;
  std::vector<double> silhouette; // aligned with rows
  double mean_silhouette = 0.0;
  int lambda = 1;
  cluster::KChoice k_choice;

  std::vector<std::size_t> cluster_sizes() const;
  /// Id of the largest cluster, lowest id on ties.
  int largest_cluster() const;
};

struct ClusterResult {
  std::vector<ClassClusters> classes;
  std::size_t t_init = 0;
  model::LayerTag layer = model::LayerTag::last_layer_outputs;
  std::size_t n = 0;

  /// Cluster id within its class for each dataset row.
  std::vector<int> cluster_of() const;
  /// Global id of (class, cluster) pairs, numbered class by class.
  std::vector<int> global_group_of() const;
  std::size_t global_group_count() const;
  /// Rows outside the largest cluster of their class.
  std::vector<bool> inferred_minority() const;
};

/// 1 at or above 0.9, 2 in [0.7, 0.9), 3 below 0.7.
int choose_lambda(double mean_silhouette);

/// Clusters the rows of `outputs` class by class.
ClusterResult cluster_outputs(const Matrix& outputs, std::span<const int> labels, const InferenceOptions& options);

/// Collects `layer` outputs of the training set from a net that has already
/// been trained for T_init and clusters them per class.
ClusterResult infer_groups(const model::TwoLayerNet& net, const datagen::Dataset& data, std::size_t t_init,
                           model::LayerTag layer, const InferenceOptions& options);

}  // namespace spare::inference
