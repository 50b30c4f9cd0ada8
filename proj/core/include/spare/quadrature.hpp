#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace spare::quad {

/// Nodes and weights with sum_i w_i h(x_i) ~ E[h(g)], g ~ N(0, 1).
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Probabilists' Gauss-Hermite rule from the Golub-Welsch eigenproblem.
/// Exact for polynomials of degree < 2n.
Rule gauss_hermite(std::size_t n);

/// E[h(g)] for g ~ N(0, 1) by Gauss-Hermite with `nodes` points.
double gaussian_expectation(const std::function<double(double)>& h, std::size_t nodes = 128);

/// E[h(g)] for integrands that are smooth on each half-line but may kink at
/// 0: composite Gauss-Legendre panels on [-12, 0] and [0, 12].
double gaussian_expectation_split(const std::function<double(double)>& h);

}  // namespace spare::quad
