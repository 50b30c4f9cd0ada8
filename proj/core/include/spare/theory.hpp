#pragma once

#include "spare/datagen.hpp"
#include "spare/linear_proxy.hpp"
#include "spare/model.hpp"
#include "spare/trainer.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spare::theory {

struct TheoryConfig {
  double alpha = 0.1;                    // in (0, 1/4); only used for feasibility reporting
  std::vector<std::size_t> probe_steps;  // empty: early_window(d, eta)
  double c2 = 1.0;                       // phase 2 runs round(c2 d ln d / eta) steps
  std::size_t separability_step = 50;
  std::size_t coupling_steps = 100;

  void validate() const;
};

/// Geometric grid of distinct integers over [1, round(0.5 sqrt(d / eta))].
std::vector<std::size_t> early_window(std::size_t d, double eta, std::size_t points = 12);

std::size_t phase2_steps(std::size_t d, double eta, double c2);

double probe_feature(const model::TwoLayerNet& net, const Vector& v);
double probe_feature(const linear::LinearModel& model, const Vector& v, const linear::PsiConstants& k);

struct ProbeRecord {
  std::size_t step = 0;
  std::string feature;  // "core:<class>" or "spurious:<id>"
  double value = 0.0;
  double predicted = 0.0;
};

struct FeatureSlope {
  std::string feature;
  double predicted = 0.0;
  double fitted = 0.0;
  /// |fitted - predicted| / |predicted|; absent when the prediction is 0.
  std::optional<double> relative_error;
};

struct SeparabilityScore {
  int class_id = 0;
  std::optional<double> score;           // absent for classes with < 2 examples
  std::optional<double> minority_recall; // smaller 2-means cluster taken as minority
};

struct PhaseReport {
  std::vector<std::size_t> steps;
  std::vector<ProbeRecord> probes;
  std::vector<FeatureSlope> slopes;
  std::vector<SeparabilityScore> separability;
  double kappa = 0.0;
  double noise_floor = 0.0;  // 3 kappa 2 eta zeta^2 / d
  double zeta = 0.0;
  datagen::InputDistributionReport input;

  const FeatureSlope& slope(const std::string& feature) const;
};

/// Predicted early slopes: core 2 eta zeta^2 c |v_c|^2 (n_c / n) / d and
/// spurious 2 eta zeta^2 |v_s|^2 (sum_c sign(c) n_{c,s}) / (n d).
std::map<std::string, double> predicted_slopes(const datagen::Dataset& data, double eta, double zeta);

/// Least-squares slope through the origin.
double fit_slope_through_origin(const std::vector<double>& t, const std::vector<double>& y);

/// Trains full batch to the last probe step and fits slopes over probe steps
/// in the first half of the window.
PhaseReport phase1_check(const datagen::Dataset& data, const model::NetConfig& net_config,
                         const train::TrainConfig& train_config, const TheoryConfig& theory_config);

/// Per class: exact 2-means on the scalar outputs of that class; the score is
/// the overlap of clusters with the majority/minority tags under the better
/// of the two cluster-to-tag matchings.
std::vector<SeparabilityScore> separability_score(std::span<const double> outputs, std::span<const int> labels,
                                                  const std::vector<bool>& true_majority);

/// (1/n)(sum_c n_c^2 sigma_c^2 |v_c|^2)^{1/2} + (1/n)(sum_s (n_{+1,s} - n_{-1,s})^2 sigma_s^2 |v_s|^2)^{1/2}.
double kappa(const datagen::Dataset& data);

/// Trains `steps` full-batch steps and scores separability of the outputs.
std::vector<SeparabilityScore> separability_at(const datagen::Dataset& data, const model::NetConfig& net_config,
                                               const train::TrainConfig& train_config, std::size_t steps);

struct DominationClass {
  int class_id = 0;
  int spurious_id = 0;  // of the class's majority group
  double f_core = 0.0;
  double f_spurious = 0.0;
  double ratio = 0.0;  // |f(v_s)| / |f(v_c)|, +inf when f(v_c) = 0
  double r_core = 0.0;
  double r_spurious = 0.0;
  double bound = 0.0;  // sqrt(2) R_s / R_c
  double closed_form_ratio = 0.0;  // |<b, v_s>| |v_s| / (|<b, v_c>| |v_c|) for bias-removed b*
};

struct DominationReport {
  std::size_t steps = 0;
  std::vector<DominationClass> classes;
  bool hypothesis_met = false;  // min(R_c, 1) > 5 R_s for every majority group
  std::vector<std::string> warnings;
  datagen::InputDistributionReport input;
};

DominationReport phase2_domination(const datagen::Dataset& data, const model::NetConfig& net_config,
                                   const train::TrainConfig& train_config, const TheoryConfig& theory_config);

struct AssumptionReport {
  std::vector<std::size_t> steps;
  std::vector<double> train_gap;     // (1/n) sum_i (f_lin - f)^2
  std::vector<double> core_gap;      // max over core features |f_lin(v) - f(v)|
  std::vector<double> spurious_gap;  // max over majority spurious features
  linear::PsiConstants constants;
};

/// Runs network GD and linear-proxy GD with the same eta and data in lockstep.
AssumptionReport assumption_check(const datagen::Dataset& data, const model::NetConfig& net_config,
                                  const train::TrainConfig& train_config, std::size_t steps);

void write_phase1_csv(const PhaseReport& report, const std::filesystem::path& path);
void write_separability_csv(const std::vector<SeparabilityScore>& scores, std::size_t step,
                            const std::filesystem::path& path);
void write_domination_csv(const DominationReport& report, const std::filesystem::path& path);
void write_assumption_csv(const AssumptionReport& report, const std::filesystem::path& path);

}  // namespace spare::theory
