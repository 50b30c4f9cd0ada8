#pragma once

#include "spare/activation.hpp"
#include "spare/datagen.hpp"
#include "spare/model.hpp"
#include "spare/types.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spare::linear {

/// Gaussian moments of the activation, g ~ N(0, 1):
/// zeta = E[phi'(g)], nu = E[g phi'(g)] * trace_term,
/// theta0 = E[phi(g)], theta1 = E[g phi'(g)], theta2 = E[(g^3/2 - g) phi'(g)].
struct PsiConstants {
  double zeta = 0.0;
  double nu = 0.0;
  double theta0 = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
};

/// trace_term is sqrt(Tr[Sigma^2] / d).
PsiConstants activation_constants(const model::Activation& activation, double trace_term);

/// sqrt(Tr[Sigma^2] / d) for the uncentered second moment Sigma = X^T X / n.
double covariance_trace_term(const Matrix& x);

/// [sqrt(2/d) zeta x ; sqrt(3/(2d)) nu ; theta0 + theta1 (r - 1) + theta2 (r - 1)^2]
/// with r = |x| / sqrt(d). Length d + 2.
Vector psi(const Vector& x, const PsiConstants& k);

/// Row i is psi(x_i).
Matrix psi_matrix(const Matrix& x, const PsiConstants& k);

struct LinearModel {
  Vector beta_data;  // d
  double beta_bias = 0.0;
  double beta_norm = 0.0;

  static LinearModel zeros(std::size_t d);
  std::size_t d() const { return static_cast<std::size_t>(beta_data.size()); }
  /// (beta_data, beta_bias, beta_norm) stacked.
  Vector stacked() const;
  static LinearModel from_stacked(const Vector& beta);
};

double linear_forward(const LinearModel& model, const Vector& x, const PsiConstants& k);
Vector linear_forward_batch(const LinearModel& model, const Matrix& psi_rows);

/// beta <- beta - (eta / n) Psi^T (Psi beta - y).
LinearModel linear_gd_step(const LinearModel& model, const Matrix& psi_rows, std::span<const int> labels, double eta);

/// Minimum-norm least squares through an SVD with singular values below
/// 1e-10 * sigma_max treated as zero. With `bias_removed` the bias and norm
/// columns are dropped and their coefficients are 0.
LinearModel linear_closed_form(const Matrix& psi_rows, std::span<const int> labels, bool bias_removed = false);

inline constexpr double kPinvCutoff = 1e-10;

/// Outputs of a model at a list of steps, one vector per step.
struct OutputTrace {
  std::vector<std::size_t> steps;
  std::vector<Vector> outputs;

  void add(std::size_t step, Vector out);
};

/// (1/n) sum_i (a_i - b_i)^2 per recorded step. Steps must agree.
std::vector<double> coupling_gap(const OutputTrace& net, const OutputTrace& lin);

/// Feature label used in gap maps and reports: "core:<id>" or "spurious:<id>".
std::string core_label(int id);
std::string spurious_label(int id);

/// |f_lin(v) - f(v)| for every core feature and every spurious feature of a
/// majority group.
std::map<std::string, double> feature_gap(const model::TwoLayerNet& net, const LinearModel& model,
                                          const datagen::FeatureBank& bank,
                                          std::span<const datagen::GroupSpec> groups, const PsiConstants& k);

inline constexpr char kLinearMagic[4] = {'S', 'P', 'L', 'M'};

/// "SPLM", version u32, d u64, then beta_data, beta_bias, beta_norm and the
/// five constants as f64.
void save_linear(const LinearModel& model, const PsiConstants& k, const std::filesystem::path& path);
std::pair<LinearModel, PsiConstants> load_linear(const std::filesystem::path& path);

}  // namespace spare::linear
