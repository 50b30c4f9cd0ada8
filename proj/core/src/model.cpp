#include "spare/model.hpp"

#include "binary.hpp"
#include "spare/rng.hpp"

#include <cmath>
#include <random>

namespace spare::model {

std::string to_string(Loss loss) { return loss == Loss::l2 ? "l2" : "cross_entropy"; }

Loss parse_loss(const std::string& text) {
  if (text == "l2") return Loss::l2;
  if (text == "cross_entropy" || text == "ce") return Loss::cross_entropy;
  throw ConfigError("unknown loss '" + text + "' (expected l2 or cross_entropy)");
}

std::string to_string(LayerTag tag) {
  return tag == LayerTag::last_layer_outputs ? "last_layer_outputs" : "penultimate_features";
}

LayerTag parse_layer_tag(const std::string& text) {
  if (text == "last_layer_outputs") return LayerTag::last_layer_outputs;
  if (text == "penultimate_features") return LayerTag::penultimate_features;
  throw ConfigError("unknown layer tag '" + text + "' (expected last_layer_outputs or penultimate_features)");
}

namespace {

void check_input(const TwoLayerNet& net, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != net.d()) {
    throw Error("input dimension " + std::to_string(x.cols()) + " does not match network d = " +
                std::to_string(net.d()));
  }
}

void check_labels(const TwoLayerNet& net, Loss kind, const Matrix& x, std::span<const int> labels) {
  if (labels.size() != static_cast<std::size_t>(x.rows()))
    throw Error("batch has " + std::to_string(x.rows()) + " inputs but " + std::to_string(labels.size()) + " labels");
  if (kind == Loss::l2) {
    if (net.o() != 1) throw Error("l2 loss needs a scalar head (o = 1); use cross_entropy for o > 1");
    for (int y : labels)
      if (y != 1 && y != -1) throw Error("l2 loss needs labels +-1, got " + std::to_string(y));
  } else {
    if (net.o() < 2) throw Error("cross entropy needs o >= 2");
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= net.o())
        throw Error("label " + std::to_string(y) + " outside [0, " + std::to_string(net.o()) + ")");
  }
}

Matrix preactivation(const TwoLayerNet& net, const Matrix& x) {
  return (x * net.w.transpose()) / std::sqrt(static_cast<double>(net.d()));
}

Matrix apply(const Activation& a, const Matrix& h) {
  return h.unaryExpr([&a](double u) { return a.value(u); });
}

// log sum exp of one row, stable.
double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double mx = row.maxCoeff();
  return mx + std::log((row.array() - mx).exp().sum());
}

}  // namespace

Vector TwoLayerNet::forward(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != d())
    throw Error("input dimension " + std::to_string(x.size()) + " does not match network d = " + std::to_string(d()));
  const Vector h = (w * x) / std::sqrt(static_cast<double>(d()));
  const Vector a = h.unaryExpr([this](double u) { return activation.value(u); });
  return z.transpose() * a / std::sqrt(static_cast<double>(m()));
}

Matrix TwoLayerNet::hidden(const Matrix& x) const {
  check_input(*this, x);
  return apply(activation, preactivation(*this, x)) / std::sqrt(static_cast<double>(m()));
}

Matrix TwoLayerNet::forward_batch(const Matrix& x) const { return hidden(x) * z; }

TwoLayerNet init_symmetric(std::size_t m, std::size_t d, std::size_t o, Activation activation, std::uint64_t seed) {
  if (m == 0 || m % 2 != 0) throw ConfigError("hidden width m must be positive and even (got " + std::to_string(m) + ")");
  if (d == 0 || o == 0) throw ConfigError("input dimension d and output count o must be positive");
  TwoLayerNet net;
  net.activation = activation;
  const auto half = static_cast<Eigen::Index>(m / 2);
  net.w.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  net.z.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(o));
  Rng rng = make_rng(seed, Stream::init);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin;
  for (Eigen::Index i = 0; i < half; ++i)
    for (Eigen::Index j = 0; j < net.w.cols(); ++j) net.w(i, j) = normal(rng);
  for (Eigen::Index i = 0; i < half; ++i)
    for (Eigen::Index k = 0; k < net.z.cols(); ++k) net.z(i, k) = coin(rng) ? 1.0 : -1.0;
  net.w.bottomRows(half) = net.w.topRows(half);
  net.z.bottomRows(half) = -net.z.topRows(half);
  return net;
}

double l2_loss(const TwoLayerNet& net, const Matrix& x, std::span<const int> labels) {
  check_labels(net, Loss::l2, x, labels);
  const Matrix f = net.forward_batch(x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const double r = f(i, 0) - labels[static_cast<std::size_t>(i)];
    s += r * r;
  }
  return s / (2.0 * static_cast<double>(f.rows()));
}

double cross_entropy_loss(const TwoLayerNet& net, const Matrix& x, std::span<const int> labels) {
  check_labels(net, Loss::cross_entropy, x, labels);
  const Matrix f = net.forward_batch(x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.rows(); ++i) s += log_sum_exp(f.row(i)) - f(i, labels[static_cast<std::size_t>(i)]);
  return s / static_cast<double>(f.rows());
}

double loss(const TwoLayerNet& net, Loss kind, const Matrix& x, std::span<const int> labels) {
  return kind == Loss::l2 ? l2_loss(net, x, labels) : cross_entropy_loss(net, x, labels);
}

Vector example_losses(const TwoLayerNet& net, Loss kind, const Matrix& x, std::span<const int> labels) {
  check_labels(net, kind, x, labels);
  const Matrix f = net.forward_batch(x);
  Vector out(f.rows());
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (kind == Loss::l2) {
      const double r = f(i, 0) - y;
      out[i] = 0.5 * r * r;
    } else {
      out[i] = log_sum_exp(f.row(i)) - f(i, y);
    }
  }
  return out;
}

Gradient loss_gradient(const TwoLayerNet& net, Loss kind, const Matrix& x, std::span<const int> labels,
                       std::span<const double> weights) {
  check_input(net, x);
  check_labels(net, kind, x, labels);
  const auto n = x.rows();
  if (!weights.empty() && weights.size() != static_cast<std::size_t>(n))
    throw Error("weight vector length does not match batch size");
  auto weight = [&](Eigen::Index i) {
    return weights.empty() ? 1.0 / static_cast<double>(n) : weights[static_cast<std::size_t>(i)];
  };
  const double sd = std::sqrt(static_cast<double>(net.d()));
  const double sm = std::sqrt(static_cast<double>(net.m()));

  const Matrix h = preactivation(net, x);
  const Matrix a = apply(net.activation, h);
  const Matrix f = a * net.z / sm;

  Gradient g;
  Matrix df(n, f.cols());  // dL/df
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = weight(i);
    const int y = labels[static_cast<std::size_t>(i)];
    if (kind == Loss::l2) {
      const double r = f(i, 0) - y;
      g.loss += wi * 0.5 * r * r;
      df(i, 0) = wi * r;
    } else {
      const double lse = log_sum_exp(f.row(i));
      g.loss += wi * (lse - f(i, y));
      df.row(i) = wi * (f.row(i).array() - lse).exp().matrix();
      df(i, y) -= wi;
    }
  }
  g.z = a.transpose() * df / sm;
  Matrix dh = df * net.z.transpose() / sm;
  dh.array() *= h.unaryExpr([&net](double u) { return net.activation.derivative(u); }).array();
  g.w = dh.transpose() * x / sd;
  return g;
}

void apply_gradient(TwoLayerNet& net, const Gradient& g, double eta_w, double eta_z) {
  net.w.noalias() -= eta_w * g.w;
  net.z.noalias() -= eta_z * g.z;
}

TwoLayerNet grad_step(const TwoLayerNet& net, Loss kind, const Matrix& x, std::span<const int> labels, double eta) {
  if (eta < 0.0) throw Error("learning rate must be nonnegative");
  TwoLayerNet out = net;
  if (eta == 0.0) return out;
  apply_gradient(out, loss_gradient(net, kind, x, labels), eta, eta);
  return out;
}

int predict_label(const Vector& output) {
  if (output.size() == 1) return output[0] >= 0.0 ? 1 : -1;
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < output.size(); ++k)
    if (output[k] > output[best]) best = k;
  return static_cast<int>(best);
}

int predict_label(const TwoLayerNet& net, const Vector& x) { return predict_label(net.forward(x)); }

std::vector<int> predict_labels(const Matrix& outputs) {
  std::vector<int> out(static_cast<std::size_t>(outputs.rows()));
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_label(Vector(outputs.row(i).transpose()));
  return out;
}

Matrix collect_outputs(const TwoLayerNet& net, const Matrix& x, LayerTag tag) {
  return tag == LayerTag::last_layer_outputs ? net.forward_batch(x) : net.hidden(x);
}

void save_checkpoint(const TwoLayerNet& net, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::BinaryWriter w(path);
  const bool has_leak = net.activation.kind == ActivationKind::leaky_relu;
  w.raw(kCheckpointMagic, 4);
  w.u32(has_leak ? 2 : 1);
  w.u8(static_cast<std::uint8_t>(net.activation.kind));
  if (has_leak) w.f64(net.activation.leak);
  w.u64(net.m());
  w.u64(net.d());
  w.u64(net.o());
  w.f64_block(net.w.data(), static_cast<std::size_t>(net.w.size()));
  w.f64_block(net.z.data(), static_cast<std::size_t>(net.z.size()));
  w.close();
}

TwoLayerNet load_checkpoint(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  char magic[4];
  r.raw(magic, 4);
  if (!std::equal(magic, magic + 4, kCheckpointMagic)) throw Error("not an SPNN checkpoint: " + path.string());
  const auto version = r.u32();
  if (version != 1 && version != 2) throw Error("unsupported SPNN version " + std::to_string(version));
  const auto tag = r.u8();
  if (tag > static_cast<std::uint8_t>(ActivationKind::identity)) throw Error("unknown activation tag in checkpoint");
  TwoLayerNet net;
  net.activation.kind = static_cast<ActivationKind>(tag);
  if (version == 2) net.activation.leak = r.f64();
  const auto m = r.u64(), d = r.u64(), o = r.u64();
  if (m == 0 || d == 0 || o == 0 || m > (1u << 24) || d > (1u << 24) || o > (1u << 16))
    throw Error("implausible checkpoint dimensions in " + path.string());
  net.w.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  net.z.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(o));
  r.f64_block(net.w.data(), m * d);
  r.f64_block(net.z.data(), m * o);
  r.expect_end();
  return net;
}

}  // namespace spare::model
