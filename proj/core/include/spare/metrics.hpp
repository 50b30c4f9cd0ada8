#pragma once

#include "spare/datagen.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spare::metrics {

using datagen::GroupKey;

struct GroupTally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

std::map<GroupKey, GroupTally> group_tallies(std::span<const int> preds, std::span<const int> labels,
                                             std::span<const GroupKey> groups);

/// Largest per-group error rate over non-empty groups.
double worst_group_error(std::span<const int> preds, std::span<const int> labels, std::span<const GroupKey> groups);

double average_accuracy(std::span<const int> preds, std::span<const int> labels);

/// sum_g (n_g^train / n^train) acc_g over the groups in `per_group_accuracy`.
double adjusted_average_accuracy(const std::map<GroupKey, double>& per_group_accuracy,
                                 const std::map<GroupKey, std::size_t>& train_group_sizes);

/// Fraction of true minority rows flagged minority; absent without true minorities.
std::optional<double> minority_recall(const std::vector<bool>& inferred_minority, const std::vector<bool>& true_minority);

/// True minority rows flagged majority.
std::size_t minority_in_majority(const std::vector<bool>& inferred_minority, const std::vector<bool>& true_minority);

/// Fraction of true majority rows flagged minority; absent without true majorities.
std::optional<double> majority_in_minority(const std::vector<bool>& inferred_minority, const std::vector<bool>& true_minority);

struct CramersV {
  double value = 0.0;
  bool degenerate = false;  // an axis with fewer than two levels
};

/// sqrt(chi^2 / (n (min(r, c) - 1))) with Pearson chi^2 and no correction.
CramersV cramers_v_table(const Eigen::MatrixXd& table);
CramersV cramers_v(std::span<const int> attribute, std::span<const int> groups);

struct EvalReport {
  std::map<GroupKey, GroupTally> per_group;
  double worst_group_accuracy = 0.0;
  double average_accuracy = 0.0;
  double adjusted_average_accuracy = 0.0;
  std::optional<double> minority_recall;
  std::optional<std::size_t> minority_in_majority_count;
  std::optional<double> majority_in_minority_fraction;
  std::map<std::string, double> cramers_v;  // attribute name -> V against inferred groups
};

EvalReport evaluate(std::span<const int> preds, const datagen::Dataset& data,
                    const std::map<GroupKey, std::size_t>& train_group_sizes);

std::string group_name(const GroupKey& g);

}  // namespace spare::metrics
