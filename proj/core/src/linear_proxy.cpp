#include "spare/linear_proxy.hpp"

#include "binary.hpp"
#include "spare/quadrature.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace spare::linear {

PsiConstants activation_constants(const model::Activation& activation, double trace_term) {
  if (activation.kind == model::ActivationKind::leaky_relu && !std::isfinite(activation.leak))
    throw Error("leaky activation needs a finite slope");
  auto expect = [&](const std::function<double(double)>& h) {
    return activation.piecewise_linear() ? quad::gaussian_expectation_split(h) : quad::gaussian_expectation(h, 128);
  };
  auto phi = [&](double g) { return activation.value(g); };
  auto dphi = [&](double g) { return activation.derivative(g); };
  PsiConstants k;
  k.zeta = expect(dphi);
  k.theta0 = expect(phi);
  k.theta1 = expect([&](double g) { return g * dphi(g); });
  k.theta2 = expect([&](double g) { return (0.5 * g * g * g - g) * dphi(g); });
  k.nu = k.theta1 * trace_term;
  return k;
}

double covariance_trace_term(const Matrix& x) {
  const double n = static_cast<double>(x.rows());
  const double d = static_cast<double>(x.cols());
  if (x.rows() == 0) throw Error("covariance of an empty dataset");
  // Tr[(X^T X)^2] = |X^T X|_F^2 = |X X^T|_F^2; use the smaller Gram matrix.
  const double fro2 = x.rows() <= x.cols() ? (x * x.transpose()).squaredNorm() : (x.transpose() * x).squaredNorm();
  return std::sqrt(fro2 / (n * n) / d);
}

Vector psi(const Vector& x, const PsiConstants& k) {
  const auto d = x.size();
  const double dd = static_cast<double>(d);
  Vector out(d + 2);
  out.head(d) = std::sqrt(2.0 / dd) * k.zeta * x;
  out[d] = std::sqrt(3.0 / (2.0 * dd)) * k.nu;
  const double r = x.norm() / std::sqrt(dd) - 1.0;
  out[d + 1] = k.theta0 + k.theta1 * r + k.theta2 * r * r;
  return out;
}

Matrix psi_matrix(const Matrix& x, const PsiConstants& k) {
  const auto n = x.rows();
  const auto d = x.cols();
  const double dd = static_cast<double>(d);
  Matrix out(n, d + 2);
  out.leftCols(d) = std::sqrt(2.0 / dd) * k.zeta * x;
  out.col(d).setConstant(std::sqrt(3.0 / (2.0 * dd)) * k.nu);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = x.row(i).norm() / std::sqrt(dd) - 1.0;
    out(i, d + 1) = k.theta0 + k.theta1 * r + k.theta2 * r * r;
  }
  return out;
}

LinearModel LinearModel::zeros(std::size_t d) { return {Vector::Zero(static_cast<Eigen::Index>(d)), 0.0, 0.0}; }

Vector LinearModel::stacked() const {
  Vector b(beta_data.size() + 2);
  b << beta_data, beta_bias, beta_norm;
  return b;
}

LinearModel LinearModel::from_stacked(const Vector& beta) {
  if (beta.size() < 2) throw Error("stacked linear coefficients need length d + 2");
  const auto d = beta.size() - 2;
  return {beta.head(d), beta[d], beta[d + 1]};
}

double linear_forward(const LinearModel& model, const Vector& x, const PsiConstants& k) {
  if (x.size() != model.beta_data.size()) throw Error("linear model dimension mismatch");
  return psi(x, k).dot(model.stacked());
}

Vector linear_forward_batch(const LinearModel& model, const Matrix& psi_rows) {
  if (psi_rows.cols() != model.beta_data.size() + 2) throw Error("psi rows have the wrong width");
  return psi_rows * model.stacked();
}

namespace {

Vector label_vector(std::span<const int> labels) {
  Vector y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Eigen::Index>(i)] = labels[i];
  return y;
}

}  // namespace

LinearModel linear_gd_step(const LinearModel& model, const Matrix& psi_rows, std::span<const int> labels, double eta) {
  if (static_cast<std::size_t>(psi_rows.rows()) != labels.size()) throw Error("psi rows and labels disagree in length");
  const Vector beta = model.stacked();
  const Vector residual = psi_rows * beta - label_vector(labels);
  const double n = static_cast<double>(psi_rows.rows());
  return LinearModel::from_stacked(beta - (eta / n) * (psi_rows.transpose() * residual));
}

LinearModel linear_closed_form(const Matrix& psi_rows, std::span<const int> labels, bool bias_removed) {
  if (psi_rows.rows() == 0) throw Error("closed form needs at least one example");
  if (static_cast<std::size_t>(psi_rows.rows()) != labels.size()) throw Error("psi rows and labels disagree in length");
  const auto d = psi_rows.cols() - 2;
  const Eigen::MatrixXd a = bias_removed ? Eigen::MatrixXd(psi_rows.leftCols(d)) : Eigen::MatrixXd(psi_rows);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? kPinvCutoff * s[0] : 0.0;
  const Vector uty = svd.matrixU().transpose() * label_vector(labels);
  Vector coef = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > cutoff) coef[i] = uty[i] / s[i];
  const Vector beta = svd.matrixV() * coef;
  if (bias_removed) return {beta, 0.0, 0.0};
  return LinearModel::from_stacked(beta);
}

void OutputTrace::add(std::size_t step, Vector out) {
  if (!steps.empty() && step <= steps.back()) throw Error("output trace steps must strictly increase");
  steps.push_back(step);
  outputs.push_back(std::move(out));
}

std::vector<double> coupling_gap(const OutputTrace& net, const OutputTrace& lin) {
  if (net.steps != lin.steps) throw Error("coupling gap: network and linear traces were recorded at different steps");
  std::vector<double> gap;
  gap.reserve(net.steps.size());
  for (std::size_t k = 0; k < net.steps.size(); ++k) {
    if (net.outputs[k].size() != lin.outputs[k].size() || net.outputs[k].size() == 0)
      throw Error("coupling gap: output vectors differ in length at step " + std::to_string(net.steps[k]));
    gap.push_back((net.outputs[k] - lin.outputs[k]).squaredNorm() / static_cast<double>(net.outputs[k].size()));
  }
  return gap;
}

std::string core_label(int id) { return "core:" + std::to_string(id); }
std::string spurious_label(int id) { return "spurious:" + std::to_string(id); }

std::map<std::string, double> feature_gap(const model::TwoLayerNet& net, const LinearModel& model,
                                          const datagen::FeatureBank& bank,
                                          std::span<const datagen::GroupSpec> groups, const PsiConstants& k) {
  if (net.o() != 1) throw Error("feature gap needs a scalar network head");
  std::map<std::string, double> out;
  auto gap = [&](const Vector& v) { return std::abs(linear_forward(model, v, k) - net.forward(v)[0]); };
  for (const auto& [id, v] : bank.core) out[core_label(id)] = gap(v);
  for (const auto& g : groups)
    if (g.is_majority) out[spurious_label(g.spurious_id)] = gap(bank.spurious_feature(g.spurious_id));
  return out;
}

void save_linear(const LinearModel& model, const PsiConstants& k, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::BinaryWriter w(path);
  w.raw(kLinearMagic, 4);
  w.u32(1);
  w.u64(model.d());
  w.f64_block(model.beta_data.data(), model.d());
  w.f64(model.beta_bias);
  w.f64(model.beta_norm);
  for (double c : {k.zeta, k.nu, k.theta0, k.theta1, k.theta2}) w.f64(c);
  w.close();
}

std::pair<LinearModel, PsiConstants> load_linear(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  char magic[4];
  r.raw(magic, 4);
  if (!std::equal(magic, magic + 4, kLinearMagic)) throw Error("not an SPLM file: " + path.string());
  if (r.u32() != 1) throw Error("unsupported SPLM version");
  const auto d = r.u64();
  if (d == 0 || d > (1u << 24)) throw Error("implausible SPLM dimension");
  LinearModel m = LinearModel::zeros(d);
  r.f64_block(m.beta_data.data(), d);
  m.beta_bias = r.f64();
  m.beta_norm = r.f64();
  PsiConstants k;
  k.zeta = r.f64();
  k.nu = r.f64();
  k.theta0 = r.f64();
  k.theta1 = r.f64();
  k.theta2 = r.f64();
  r.expect_end();
  return {m, k};
}

}  // namespace spare::linear
