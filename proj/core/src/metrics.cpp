#include "spare/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace spare::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

}  // namespace

std::map<GroupKey, GroupTally> group_tallies(std::span<const int> preds, std::span<const int> labels,
                                             std::span<const GroupKey> groups) {
  check_lengths(preds.size(), labels.size(), "group tallies");
  check_lengths(preds.size(), groups.size(), "group tallies");
  std::map<GroupKey, GroupTally> out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto& t = out[groups[i]];
    ++t.total;
    if (preds[i] == labels[i]) ++t.correct;
  }
  return out;
}

double worst_group_error(std::span<const int> preds, std::span<const int> labels, std::span<const GroupKey> groups) {
  const auto tallies = group_tallies(preds, labels, groups);
  if (tallies.empty()) throw Error("worst-group error over no examples");
  double worst = 0.0;
  for (const auto& [g, t] : tallies) worst = std::max(worst, 1.0 - t.accuracy());
  return worst;
}

double average_accuracy(std::span<const int> preds, std::span<const int> labels) {
  check_lengths(preds.size(), labels.size(), "average accuracy");
  if (preds.empty()) throw Error("average accuracy over no examples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double adjusted_average_accuracy(const std::map<GroupKey, double>& per_group_accuracy,
                                 const std::map<GroupKey, std::size_t>& train_group_sizes) {
  double total = 0.0;
  double acc = 0.0;
  for (const auto& [g, a] : per_group_accuracy) {
    const auto it = train_group_sizes.find(g);
    if (it == train_group_sizes.end()) throw Error("group " + group_name(g) + " has no training size");
    total += static_cast<double>(it->second);
    acc += static_cast<double>(it->second) * a;
  }
  if (!(total > 0.0)) throw Error("adjusted average accuracy needs positive training group sizes");
  return acc / total;
}

std::optional<double> minority_recall(const std::vector<bool>& inferred, const std::vector<bool>& truth) {
  check_lengths(inferred.size(), truth.size(), "minority recall");
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!truth[i]) continue;
    ++total;
    hits += inferred[i];
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::size_t minority_in_majority(const std::vector<bool>& inferred, const std::vector<bool>& truth) {
  check_lengths(inferred.size(), truth.size(), "minority in majority");
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) count += truth[i] && !inferred[i];
  return count;
}

std::optional<double> majority_in_minority(const std::vector<bool>& inferred, const std::vector<bool>& truth) {
  check_lengths(inferred.size(), truth.size(), "majority in minority");
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) continue;
    ++total;
    hits += inferred[i];
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(total);
}

CramersV cramers_v_table(const Eigen::MatrixXd& table) {
  if ((table.array() < 0.0).any()) throw Error("contingency table entries must be nonnegative");
  const Eigen::VectorXd rows = table.rowwise().sum();
  const Eigen::RowVectorXd cols = table.colwise().sum();
  const auto r = (rows.array() > 0.0).count();
  const auto c = (cols.array() > 0.0).count();
  const double n = table.sum();
  CramersV v;
  if (r < 2 || c < 2 || !(n > 0.0)) {
    v.degenerate = true;
    return v;
  }
  double chi2 = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    if (rows[i] == 0.0) continue;
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      if (cols[j] == 0.0) continue;
      const double expected = rows[i] * cols[j] / n;
      const double diff = table(i, j) - expected;
      chi2 += diff * diff / expected;
    }
  }
  v.value = std::sqrt(chi2 / (n * static_cast<double>(std::min(r, c) - 1)));
  return v;
}

CramersV cramers_v(std::span<const int> attribute, std::span<const int> groups) {
  check_lengths(attribute.size(), groups.size(), "Cramer's V");
  std::map<int, Eigen::Index> a_level, g_level;
  for (int a : attribute) a_level.emplace(a, 0);
  for (int g : groups) g_level.emplace(g, 0);
  Eigen::Index k = 0;
  for (auto& [a, idx] : a_level) idx = k++;
  k = 0;
  for (auto& [g, idx] : g_level) idx = k++;
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a_level.size()), static_cast<Eigen::Index>(g_level.size()));
  for (std::size_t i = 0; i < attribute.size(); ++i) table(a_level[attribute[i]], g_level[groups[i]]) += 1.0;
  return cramers_v_table(table);
}

EvalReport evaluate(std::span<const int> preds, const datagen::Dataset& data,
                    const std::map<GroupKey, std::size_t>& train_group_sizes) {
  EvalReport r;
  r.per_group = group_tallies(preds, data.labels, data.groups);
  if (r.per_group.empty()) throw Error("evaluation over no examples");
  r.worst_group_accuracy = 1.0;
  std::map<GroupKey, double> acc;
  for (const auto& [g, t] : r.per_group) {
    acc[g] = t.accuracy();
    r.worst_group_accuracy = std::min(r.worst_group_accuracy, t.accuracy());
  }
  r.average_accuracy = average_accuracy(preds, data.labels);
  r.adjusted_average_accuracy = adjusted_average_accuracy(acc, train_group_sizes);
  return r;
}

std::string group_name(const GroupKey& g) {
  return "g(" + std::to_string(g.class_id) + "," + std::to_string(g.spurious_id) + ")";
}

}  // namespace spare::metrics
