#pragma once

#include "spare/datagen.hpp"
#include "spare/model.hpp"
#include "spare/rng.hpp"

#include <cmath>
#include <algorithm>
#include <functional>
#include <limits>
#include <random>

namespace spare::fixtures {

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = g(rng);
  return out;
}

/// Symmetric network whose weights are then perturbed so the output is not
/// identically zero.
inline model::TwoLayerNet random_net(std::size_t m, std::size_t d, std::size_t o, model::Activation act,
                                     std::uint64_t seed) {
  auto net = model::init_symmetric(m, d, o, act, seed);
  net.w += gaussian_matrix(m, d, seed + 11, 0.3);
  net.z += gaussian_matrix(m, o, seed + 12, 0.3);
  return net;
}

/// Central differences of `f` at every entry of `p`.
inline Matrix central_difference(Matrix& p, const std::function<double()>& f, double h = 1e-6) {
  Matrix g(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p.data()[i];
    p.data()[i] = keep + h;
    const double up = f();
    p.data()[i] = keep - h;
    const double down = f();
    p.data()[i] = keep;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

/// O(n^2) silhouette straight from the definition.
inline std::vector<double> brute_silhouette(const Matrix& x, const std::vector<int>& a) {
  const int k = *std::max_element(a.begin(), a.end()) + 1;
  std::vector<std::size_t> size(k, 0);
  for (int c : a) ++size[c];
  std::vector<double> s(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (size[a[i]] == 1) continue;
    std::vector<double> sum(k, 0.0);
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (j == i) continue;
      double d2 = 0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) d2 += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      sum[a[j]] += std::sqrt(d2);
    }
    const double own = sum[a[i]] / static_cast<double>(size[a[i]] - 1);
    double other = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != a[i] && size[c] > 0) other = std::min(other, sum[c] / static_cast<double>(size[c]));
    const double m = std::max(own, other);
    s[i] = m == 0 ? 0.0 : (other - own) / m;
  }
  return s;
}

/// Two classes (+1/-1) with one majority and one minority group each.
inline std::vector<datagen::GroupSpec> binary_groups(std::size_t major, std::size_t minor) {
  return {{1, 1, major, true}, {1, -1, minor, false}, {-1, -1, major, true}, {-1, 1, minor, false}};
}

inline datagen::FeatureBank binary_bank(std::size_t d, double core_mag, double spur_mag, double sigma_c,
                                        double sigma_s, double ambient) {
  datagen::NoiseLevels s;
  s.core = {{-1, sigma_c}, {1, sigma_c}};
  s.spurious = {{-1, sigma_s}, {1, sigma_s}};
  s.ambient = ambient;
  return datagen::build_feature_bank(d, {{-1, core_mag}, {1, core_mag}}, {{-1, spur_mag}, {1, spur_mag}}, s);
}

}  // namespace spare::fixtures
