#include "spare/quadrature.hpp"

#include "spare/types.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>

namespace spare::quad {

Rule gauss_hermite(std::size_t n) {
  if (n == 0) throw Error("Gauss-Hermite rule needs at least one node");
  // Jacobi matrix of the monic probabilists' Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = b;
    jacobi(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  if (eig.info() != Eigen::Success) throw Error("Gauss-Hermite eigenproblem failed");
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = eig.eigenvalues()[static_cast<Eigen::Index>(i)];
    const double v0 = eig.eigenvectors()(0, static_cast<Eigen::Index>(i));
    rule.weights[i] = v0 * v0;
  }
  return rule;
}

double gaussian_expectation(const std::function<double(double)>& h, std::size_t nodes) {
  static thread_local std::size_t cached_n = 0;
  static thread_local Rule cached;
  if (cached_n != nodes) {
    cached = gauss_hermite(nodes);
    cached_n = nodes;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < cached.nodes.size(); ++i) s += cached.weights[i] * h(cached.nodes[i]);
  return s;
}

double gaussian_expectation_split(const std::function<double(double)>& h) {
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
  auto density_weighted = [&](double u) { return h(u) * std::exp(-0.5 * u * u) * inv_sqrt_2pi; };
  constexpr double kWidth = 0.5;
  constexpr int kPanels = 24;
  double s = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double a = p * kWidth;
    s += boost::math::quadrature::gauss<double, 30>::integrate(density_weighted, a, a + kWidth);
    s += boost::math::quadrature::gauss<double, 30>::integrate(density_weighted, -a - kWidth, -a);
  }
  return s;
}

}  // namespace spare::quad
