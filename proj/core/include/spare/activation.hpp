#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace spare::model {

enum class ActivationKind : std::uint8_t {
  relu = 0,
  leaky_relu = 1,
  tanh = 2,
  erf = 3,
  softplus = 4,
  identity = 5,
};

/// Entry-wise nonlinearity of the hidden layer.
///
/// For the piecewise-linear kinds the derivative at exactly 0 is taken from
/// the right branch, i.e. phi'(0) = 1.
struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double leak = 0.0;  // negative-side slope, leaky_relu only

  static Activation relu() { return {ActivationKind::relu, 0.0}; }
  static Activation leaky(double a) { return {ActivationKind::leaky_relu, a}; }
  static Activation of(ActivationKind k) { return {k, 0.0}; }

  double value(double u) const;
  double derivative(double u) const;
  bool piecewise_linear() const;

  /// "relu", "leaky(0.1)", "tanh", "erf", "softplus", "identity".
  std::string name() const;
  static Activation parse(std::string_view text);

  friend bool operator==(const Activation&, const Activation&) = default;
};

}  // namespace spare::model
