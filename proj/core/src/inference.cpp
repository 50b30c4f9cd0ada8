#include "spare/inference.hpp"

#include <algorithm>
#include <map>

namespace spare::inference {

std::vector<std::size_t> ClassClusters::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
  return sizes;
}

int ClassClusters::largest_cluster() const {
  const auto sizes = cluster_sizes();
  return static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
}

std::vector<int> ClusterResult::cluster_of() const {
  std::vector<int> out(n, -1);
  for (const auto& c : classes)
    for (std::size_t j = 0; j < c.rows.size(); ++j) out[c.rows[j]] = c.assignment[j];
  return out;
}

std::vector<int> ClusterResult::global_group_of() const {
  std::vector<int> out(n, -1);
  int offset = 0;
  for (const auto& c : classes) {
    for (std::size_t j = 0; j < c.rows.size(); ++j) out[c.rows[j]] = offset + c.assignment[j];
    offset += static_cast<int>(c.k);
  }
  return out;
}

std::size_t ClusterResult::global_group_count() const {
  std::size_t total = 0;
  for (const auto& c : classes) total += c.k;
  return total;
}

std::vector<bool> ClusterResult::inferred_minority() const {
  std::vector<bool> out(n, false);
  for (const auto& c : classes) {
    const int big = c.largest_cluster();
    for (std::size_t j = 0; j < c.rows.size(); ++j) out[c.rows[j]] = c.assignment[j] != big;
  }
  return out;
}

int choose_lambda(double mean_silhouette) {
  if (mean_silhouette >= 0.9) return 1;
  if (mean_silhouette >= 0.7) return 2;
  return 3;
}

ClusterResult cluster_outputs(const Matrix& outputs, std::span<const int> labels, const InferenceOptions& options) {
  if (static_cast<std::size_t>(outputs.rows()) != labels.size())
    throw Error("cluster_outputs: " + std::to_string(outputs.rows()) + " output rows for " + std::to_string(labels.size()) + " labels");
  if (options.k_min == 0 || options.k_max < options.k_min) throw ConfigError("spare.k_range must satisfy 1 <= k_min <= k_max");
  ClusterResult result;
  result.n = labels.size();
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [c, rows] : by_class) {
    ClassClusters cc;
    cc.class_id = c;
    cc.rows = rows;
    Matrix pts(static_cast<Eigen::Index>(rows.size()), outputs.cols());
    for (std::size_t j = 0; j < rows.size(); ++j) pts.row(static_cast<Eigen::Index>(j)) = outputs.row(static_cast<Eigen::Index>(rows[j]));
    const std::uint64_t class_seed = options.seed + static_cast<std::uint64_t>(static_cast<std::uint32_t>(c)) * 7919;
    if (rows.size() < 2) {
      cc.k = 1;
      cc.assignment.assign(rows.size(), 0);
      cc.centroids = pts;
      cc.silhouette.assign(rows.size(), 0.0);
      cc.k_choice.warning = true;
    } else {
      cc.k_choice = cluster::choose_k(pts, options.k_min, options.k_max, class_seed, options.kmeans);
      cc.k = cc.k_choice.k;
      const auto km = cluster::kmeans(pts, cc.k, class_seed, options.kmeans);
      cc.assignment = km.assignment;
      cc.centroids = km.centroids;
      const auto sil = cluster::silhouette(pts, cc.assignment);
      cc.silhouette = sil.scores;
      cc.mean_silhouette = sil.mean;
    }
    cc.lambda = options.lambda_override > 0 ? options.lambda_override : choose_lambda(cc.mean_silhouette);
    result.classes.push_back(std::move(cc));
  }
  return result;
}

ClusterResult infer_groups(const model::TwoLayerNet& net, const datagen::Dataset& data, std::size_t t_init,
                           model::LayerTag layer, const InferenceOptions& options) {
  ClusterResult r = cluster_outputs(model::collect_outputs(net, data.x, layer), data.labels, options);
  r.t_init = t_init;
  r.layer = layer;
  return r;
}

}  // namespace spare::inference
