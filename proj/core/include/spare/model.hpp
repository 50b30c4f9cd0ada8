#pragma once

#include "spare/activation.hpp"
#include "spare/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace spare::model {

enum class Loss : std::uint8_t { l2, cross_entropy };
enum class LayerTag : std::uint8_t { last_layer_outputs, penultimate_features };

std::string to_string(Loss loss);
Loss parse_loss(const std::string& text);
std::string to_string(LayerTag tag);
LayerTag parse_layer_tag(const std::string& text);

/// Architecture and initialization seed of a network to be built.
struct NetConfig {
  std::size_t m = 2000;
  Activation activation = Activation::relu();
  std::uint64_t seed = 0;
};

/// f(x) = Z^T phi(W x / sqrt(d)) / sqrt(m).
struct TwoLayerNet {
  Matrix w;  // m x d
  Matrix z;  // m x o
  Activation activation;

  std::size_t m() const { return static_cast<std::size_t>(w.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(w.cols()); }
  std::size_t o() const { return static_cast<std::size_t>(z.cols()); }

  Vector forward(const Vector& x) const;
  /// One output row per input row.
  Matrix forward_batch(const Matrix& x) const;
  /// phi(W x / sqrt(d)) / sqrt(m), one row per input row.
  Matrix hidden(const Matrix& x) const;

  friend bool operator==(const TwoLayerNet&, const TwoLayerNet&) = default;
};

/// Rows m/2.. of W copy rows 0..m/2-1 (standard Gaussian); the second half of
/// Z negates the first half (uniform +-1 per output column). The output is
/// identically zero until the first update.
TwoLayerNet init_symmetric(std::size_t m, std::size_t d, std::size_t o, Activation activation,
                           std::uint64_t seed);

/// (1/2n) sum (f(x_i) - y_i)^2 with y_i = +-1. Requires o = 1.
double l2_loss(const TwoLayerNet& net, const Matrix& x, std::span<const int> labels);

/// Mean softmax cross-entropy; labels in [0, o). Requires o >= 2.
double cross_entropy_loss(const TwoLayerNet& net, const Matrix& x, std::span<const int> labels);

double loss(const TwoLayerNet& net, Loss kind, const Matrix& x, std::span<const int> labels);

/// Unaveraged loss of every row: (f - y)^2 / 2 or -log softmax(f)[y].
Vector example_losses(const TwoLayerNet& net, Loss kind, const Matrix& x, std::span<const int> labels);

struct Gradient {
  Matrix w;
  Matrix z;
  double loss = 0.0;
};

/// Gradient of sum_i weight_i * loss_i (l2: loss_i = (f_i - y_i)^2 / 2,
/// cross entropy: -log softmax(f_i)[y_i]). Empty `weights` means 1/n each.
Gradient loss_gradient(const TwoLayerNet& net, Loss kind, const Matrix& x, std::span<const int> labels,
                       std::span<const double> weights = {});

/// W -= eta_w * g.w and Z -= eta_z * g.z, both from the same pre-step weights.
void apply_gradient(TwoLayerNet& net, const Gradient& g, double eta_w, double eta_z);

/// Plain gradient descent with a single step size for both layers.
TwoLayerNet grad_step(const TwoLayerNet& net, Loss kind, const Matrix& x, std::span<const int> labels,
                      double eta);

/// Binary head: +1 when f(x) >= 0, else -1. Multiclass: argmax, lowest index
/// on ties.
int predict_label(const Vector& output);
int predict_label(const TwoLayerNet& net, const Vector& x);
std::vector<int> predict_labels(const Matrix& outputs);

/// last_layer_outputs: n x o; penultimate_features: n x m.
Matrix collect_outputs(const TwoLayerNet& net, const Matrix& x, LayerTag tag);

inline constexpr char kCheckpointMagic[4] = {'S', 'P', 'N', 'N'};

/// Version 1 for activations without parameters; version 2 stores the leak
/// slope as f64 right after the activation tag.
void save_checkpoint(const TwoLayerNet& net, const std::filesystem::path& path);
TwoLayerNet load_checkpoint(const std::filesystem::path& path);

}  // namespace spare::model
