#include "spare/activation.hpp"

#include "spare/types.hpp"

#include <cmath>
#include <sstream>

namespace spare::model {

double Activation::value(double u) const {
  switch (kind) {
    case ActivationKind::relu: return u > 0.0 ? u : 0.0;
    case ActivationKind::leaky_relu: return u >= 0.0 ? u : leak * u;
    case ActivationKind::tanh: return std::tanh(u);
    case ActivationKind::erf: return std::erf(u);
    case ActivationKind::softplus: return u > 30.0 ? u : std::log1p(std::exp(u));
    case ActivationKind::identity: return u;
  }
  return 0.0;
}

double Activation::derivative(double u) const {
  switch (kind) {
    case ActivationKind::relu: return u >= 0.0 ? 1.0 : 0.0;
    case ActivationKind::leaky_relu: return u >= 0.0 ? 1.0 : leak;
    case ActivationKind::tanh: {
      const double t = std::tanh(u);
      return 1.0 - t * t;
    }
    case ActivationKind::erf: return 2.0 / std::sqrt(M_PI) * std::exp(-u * u);
    case ActivationKind::softplus: return 1.0 / (1.0 + std::exp(-u));
    case ActivationKind::identity: return 1.0;
  }
  return 0.0;
}

bool Activation::piecewise_linear() const {
  return kind == ActivationKind::relu || kind == ActivationKind::leaky_relu ||
         kind == ActivationKind::identity;
}

std::string Activation::name() const {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: {
      std::ostringstream os;
      os.precision(17);
      os << "leaky(" << leak << ")";
      return os.str();
    }
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::erf: return "erf";
    case ActivationKind::softplus: return "softplus";
    case ActivationKind::identity: return "identity";
  }
  return "?";
}

Activation Activation::parse(std::string_view text) {
  if (text == "relu") return relu();
  if (text == "tanh") return of(ActivationKind::tanh);
  if (text == "erf") return of(ActivationKind::erf);
  if (text == "softplus") return of(ActivationKind::softplus);
  if (text == "identity") return of(ActivationKind::identity);
  if (text.starts_with("leaky(") && text.ends_with(")")) {
    const std::string inner(text.substr(6, text.size() - 7));
    try {
      std::size_t used = 0;
      const double a = std::stod(inner, &used);
      if (used == inner.size()) return leaky(a);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown activation '" + std::string(text) +
                    "' (expected relu, leaky(a), tanh, erf, softplus or identity)");
}

}  // namespace spare::model
