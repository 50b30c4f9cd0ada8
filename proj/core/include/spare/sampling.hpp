#pragma once

#include "spare/inference.hpp"
#include "spare/trainer.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spare::sampling {

enum class Strategy : std::uint8_t { erm, cb, gb, spare, jtt, gdro };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& text);

/// Whether sum_i w_i^lambda runs over the class (then classes are mixed by
/// class_mix) or over the whole training set.
enum class Normalization : std::uint8_t { per_class, global };

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& text);

struct SamplingPlan {
  Strategy strategy = Strategy::erm;
  std::vector<double> weights;        // w_i
  std::vector<double> probabilities;  // p_i, sums to 1
  std::map<int, int> lambdas;         // per class, SPARE only

  std::size_t size() const { return probabilities.size(); }
};

SamplingPlan uniform_plan(std::size_t n);

/// w_i = 1 / |V_{c,j}| for the cluster V_{c,j} holding i. Per-class
/// normalization gives p_i = mix(c) * w_i^lambda_c / sum_{class c} w^lambda_c
/// with mix(c) = n_c / n unless `class_mix` is supplied.
SamplingPlan spare_weights(const inference::ClusterResult& clusters, const std::map<int, int>& lambdas,
                           Normalization normalization = Normalization::per_class,
                           const std::optional<std::map<int, double>>& class_mix = std::nullopt);

/// The lambdas chosen per class during inference.
std::map<int, int> lambdas_of(const inference::ClusterResult& clusters);

/// p_i proportional to 1 / n_{class(i)}.
SamplingPlan class_balance_plan(std::span<const int> labels);

/// p_i proportional to 1 / |group(i)|.
SamplingPlan group_balance_plan(std::span<const int> groups);

/// Categorical draws with replacement.
class PlanSampler final : public train::BatchSource {
 public:
  PlanSampler(const SamplingPlan& plan, std::size_t batch, std::uint64_t seed);
  std::vector<std::size_t> next() override;

 private:
  std::vector<double> cumulative_;
  std::size_t batch_;
  Rng rng_;
};

std::vector<std::size_t> sample_minibatch(const SamplingPlan& plan, std::size_t batch, Rng& rng);

/// All row indices followed by (factor - 1) extra copies of each flagged row.
std::vector<std::size_t> jtt_upsample(std::size_t n, std::span<const std::size_t> flagged, std::size_t factor);

/// Rows whose predicted label differs from the true one.
std::vector<std::size_t> misclassified_rows(const model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels);

/// Rows flagged as inferred minority.
std::vector<std::size_t> minority_rows(const inference::ClusterResult& clusters);

/// Trains on minibatches drawn from the plan for config.total_steps(n)
/// steps; one epoch is ceil(n / batch) steps.
train::TrainTrace train_with_sampler(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels,
                                     const SamplingPlan& plan, const train::TrainConfig& config,
                                     const train::StepHook& hook = {});

struct GdroState {
  std::vector<double> q;  // on the simplex
  double eta_q = 0.01;

  static GdroState uniform(std::size_t groups, double eta_q);
};

/// q_g <- q_g exp(eta_q L_g) then renormalized, L_g the mean batch loss of
/// group g at the pre-step weights (0 without members); the network then
/// descends sum_g q_g L_g. Returns the weighted batch loss.
double gdro_step(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels, std::span<const int> groups,
                 const std::vector<std::size_t>& rows, GdroState& state, const train::TrainConfig& config);

train::TrainTrace train_gdro(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels,
                             std::span<const int> groups, GdroState& state, const train::TrainConfig& config,
                             const train::StepHook& hook = {});

}  // namespace spare::sampling
