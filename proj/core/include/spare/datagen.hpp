#pragma once

#include "spare/types.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spare::datagen {

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

std::string to_string(Split s);
Split parse_split(const std::string& s);

/// (class, spurious attribute) pair identifying a group g_{c,s}.
struct GroupKey {
  int class_id = 0;
  int spurious_id = 0;
  auto operator<=>(const GroupKey&) const = default;
};

/// Core and spurious feature vectors plus their noise levels.
///
/// Every stored vector is orthogonal to every other one.
struct FeatureBank {
  std::size_t dim = 0;
  std::map<int, Vector> core;
  std::map<int, Vector> spurious;
  std::map<int, double> core_sigma;
  std::map<int, double> spurious_sigma;
  double ambient_sigma = 0.0;
  bool rotated = false;

  const Vector& core_feature(int class_id) const;
  const Vector& spurious_feature(int spurious_id) const;

  /// Largest |<a, b>| / (|a| |b|) over distinct stored vectors.
  double max_abs_cosine() const;

  /// Orthonormal basis (d x k) of the span of all stored features.
  Matrix feature_basis() const;
};

struct NoiseLevels {
  std::map<int, double> core;      // sigma_c per class
  std::map<int, double> spurious;  // sigma_s per spurious id
  double ambient = 0.0;            // isotropic noise off the feature directions
};

struct BankOptions {
  bool random_rotation = false;
  std::uint64_t rotation_seed = 0;
};

/// Places every feature on its own coordinate (e_1 for the first class, ...),
/// scaled to the requested magnitude, optionally followed by one random
/// orthogonal rotation of the whole space.
FeatureBank build_feature_bank(std::size_t d,
                               const std::map<int, double>& core_magnitudes,
                               const std::map<int, double>& spurious_magnitudes,
                               const NoiseLevels& sigmas,
                               const BankOptions& options = {});

struct GroupSpec {
  int class_id = 0;
  int spurious_id = 0;
  std::size_t size = 0;
  bool is_majority = false;

  GroupKey key() const { return {class_id, spurious_id}; }
  friend bool operator==(const GroupSpec&, const GroupSpec&) = default;
};

/// Throws when a class has a non-majority group larger than one of its
/// majority groups, or when a group is empty.
void validate_groups(std::span<const GroupSpec> groups);

struct Example {
  std::int64_t id = 0;
  Vector features;
  int label = 0;
  GroupKey group;
  Split split = Split::train;
};

/// Examples stored row-wise: row i of `x` is example i.
struct Dataset {
  Matrix x;
  std::vector<int> labels;
  std::vector<GroupKey> groups;
  std::vector<std::int64_t> ids;
  Split split = Split::train;
  std::optional<FeatureBank> bank;
  std::vector<GroupSpec> group_table;
  std::uint64_t seed = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }

  Example example(std::size_t i) const;
  std::map<int, std::size_t> class_counts() const;
  std::map<GroupKey, std::size_t> group_counts() const;
  std::vector<int> classes() const;

  /// Index of each example's group in `group_table`.
  std::vector<int> group_indices() const;
  int group_index(const GroupKey& key) const;

  /// Indices of examples whose group is flagged majority in `group_table`.
  std::vector<bool> majority_mask() const;

  Dataset subset(std::span<const std::size_t> rows) const;
};

/// x = v_c + v_s + xi with xi Gaussian along v_c (sigma_c), along v_s
/// (sigma_s) and isotropic with sigma_amb on the orthogonal complement of
/// all features. Examples are emitted group by group in table order.
Dataset generate_synthetic(const FeatureBank& bank, std::span<const GroupSpec> groups,
                           std::uint64_t seed, Split split = Split::train);

/// Noise-to-signal ratio sigma / |v|.
double nsr(double magnitude, double sigma);

/// How far a dataset is from the high-dimensional regime in which a
/// two-layer network tracks its linearization (|x|^2/d close to 1, rows
/// nearly orthogonal, n and m at least d^{1+alpha}).
struct InputDistributionReport {
  double mean_sq_norm_ratio = 0.0;  // mean |x|^2 / d
  double min_sq_norm_ratio = 0.0;
  double max_sq_norm_ratio = 0.0;
  double max_abs_inner_ratio = 0.0;  // max |<x_i, x_j>| / d over sampled pairs
  double tolerance = 0.0;            // sqrt(log n / d)
  bool norms_ok = false;
  bool n_feasible = false;
  bool m_feasible = false;

  bool ok() const { return norms_ok && n_feasible && m_feasible; }
  std::string summary() const;
};

InputDistributionReport check_input_distribution(const Dataset& data, std::size_t width,
                                                 double alpha);

}  // namespace spare::datagen
