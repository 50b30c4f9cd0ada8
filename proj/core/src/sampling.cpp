#include "spare/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace spare::sampling {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::erm: return "erm";
    case Strategy::cb: return "cb";
    case Strategy::gb: return "gb";
    case Strategy::spare: return "spare";
    case Strategy::jtt: return "jtt";
    case Strategy::gdro: return "gdro";
  }
  return "?";
}

Strategy parse_strategy(const std::string& text) {
  for (auto s : {Strategy::erm, Strategy::cb, Strategy::gb, Strategy::spare, Strategy::jtt, Strategy::gdro})
    if (to_string(s) == text) return s;
  throw ConfigError("unknown strategy '" + text + "' (expected erm, cb, gb, spare, jtt or gdro)");
}

std::string to_string(Normalization n) { return n == Normalization::per_class ? "per_class" : "global"; }

Normalization parse_normalization(const std::string& text) {
  if (text == "per_class") return Normalization::per_class;
  if (text == "global") return Normalization::global;
  throw ConfigError("unknown normalization '" + text + "' (expected per_class or global)");
}

namespace {

SamplingPlan from_weights(Strategy strategy, std::vector<double> weights) {
  SamplingPlan plan;
  plan.strategy = strategy;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error("sampling plan has no positive weight");
  plan.probabilities.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) plan.probabilities[i] = weights[i] / total;
  plan.weights = std::move(weights);
  return plan;
}

std::vector<double> inverse_frequency(std::span<const int> keys) {
  std::map<int, std::size_t> counts;
  for (int k : keys) ++counts[k];
  std::vector<double> w(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) w[i] = 1.0 / static_cast<double>(counts[keys[i]]);
  return w;
}

}  // namespace

SamplingPlan uniform_plan(std::size_t n) {
  if (n == 0) throw Error("sampling plan over an empty dataset");
  return from_weights(Strategy::erm, std::vector<double>(n, 1.0));
}

std::map<int, int> lambdas_of(const inference::ClusterResult& clusters) {
  std::map<int, int> out;
  for (const auto& c : clusters.classes) out[c.class_id] = c.lambda;
  return out;
}

SamplingPlan spare_weights(const inference::ClusterResult& clusters, const std::map<int, int>& lambdas,
                           Normalization normalization, const std::optional<std::map<int, double>>& class_mix) {
  const std::size_t n = clusters.n;
  SamplingPlan plan;
  plan.strategy = Strategy::spare;
  plan.weights.assign(n, 0.0);
  plan.probabilities.assign(n, 0.0);
  std::vector<bool> covered(n, false);
  std::vector<double> powered(n, 0.0);
  double global_total = 0.0;
  std::map<int, double> class_total;
  for (const auto& c : clusters.classes) {
    const auto it = lambdas.find(c.class_id);
    if (it == lambdas.end()) throw Error("no lambda for class " + std::to_string(c.class_id));
    const int lambda = it->second;
    if (lambda < 0) throw Error("lambda must be nonnegative");
    plan.lambdas[c.class_id] = lambda;
    const auto sizes = c.cluster_sizes();
    for (std::size_t j = 0; j < c.rows.size(); ++j) {
      const auto size = sizes[static_cast<std::size_t>(c.assignment[j])];
      if (size == 0) throw Error("empty cluster in class " + std::to_string(c.class_id));
      const std::size_t row = c.rows[j];
      if (row >= n || covered[row]) throw Error("cluster result covers row " + std::to_string(row) + " twice or out of range");
      covered[row] = true;
      plan.weights[row] = 1.0 / static_cast<double>(size);
      powered[row] = std::pow(plan.weights[row], lambda);
      class_total[c.class_id] += powered[row];
      global_total += powered[row];
    }
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end())
    throw Error("cluster result leaves some rows unclustered");

  if (normalization == Normalization::global) {
    for (std::size_t i = 0; i < n; ++i) plan.probabilities[i] = powered[i] / global_total;
    return plan;
  }
  std::map<int, double> mix;
  if (class_mix) {
    double s = 0.0;
    for (const auto& [c, v] : *class_mix) {
      if (v < 0.0) throw ConfigError("class_mix entries must be nonnegative");
      s += v;
    }
    for (const auto& c : clusters.classes) {
      const auto it = class_mix->find(c.class_id);
      if (it == class_mix->end()) throw ConfigError("class_mix misses class " + std::to_string(c.class_id));
      mix[c.class_id] = it->second / s;
    }
  } else {
    for (const auto& c : clusters.classes) mix[c.class_id] = static_cast<double>(c.rows.size()) / static_cast<double>(n);
  }
  for (const auto& c : clusters.classes)
    for (auto row : c.rows) plan.probabilities[row] = mix[c.class_id] * powered[row] / class_total[c.class_id];
  return plan;
}

SamplingPlan class_balance_plan(std::span<const int> labels) {
  if (labels.empty()) throw Error("sampling plan over an empty dataset");
  return from_weights(Strategy::cb, inverse_frequency(labels));
}

SamplingPlan group_balance_plan(std::span<const int> groups) {
  if (groups.empty()) throw Error("sampling plan over an empty dataset");
  return from_weights(Strategy::gb, inverse_frequency(groups));
}

namespace {

std::vector<double> cumulative(const SamplingPlan& plan) {
  if (plan.probabilities.empty()) throw Error("cannot sample from an empty plan");
  std::vector<double> c(plan.probabilities.size());
  std::partial_sum(plan.probabilities.begin(), plan.probabilities.end(), c.begin());
  return c;
}

std::size_t draw(const std::vector<double>& cum, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, cum.back());
  const double u = unit(rng);
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  if (it == cum.end()) --it;
  return static_cast<std::size_t>(it - cum.begin());
}

}  // namespace

PlanSampler::PlanSampler(const SamplingPlan& plan, std::size_t batch, std::uint64_t seed)
    : cumulative_(cumulative(plan)), batch_(batch == 0 ? plan.size() : batch), rng_(make_rng(seed, Stream::sampler)) {}

std::vector<std::size_t> PlanSampler::next() {
  std::vector<std::size_t> rows(batch_);
  for (auto& r : rows) r = draw(cumulative_, rng_);
  return rows;
}

std::vector<std::size_t> sample_minibatch(const SamplingPlan& plan, std::size_t batch, Rng& rng) {
  const auto cum = cumulative(plan);
  std::vector<std::size_t> rows(batch);
  for (auto& r : rows) r = draw(cum, rng);
  return rows;
}

std::vector<std::size_t> jtt_upsample(std::size_t n, std::span<const std::size_t> flagged, std::size_t factor) {
  if (factor == 0) throw ConfigError("jtt upsampling factor must be at least 1");
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), 0);
  for (std::size_t copy = 1; copy < factor; ++copy)
    for (auto r : flagged) {
      if (r >= n) throw Error("flagged row " + std::to_string(r) + " out of range");
      out.push_back(r);
    }
  return out;
}

std::vector<std::size_t> misclassified_rows(const model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels) {
  const auto pred = model::predict_labels(net.forward_batch(x));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] != labels[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> minority_rows(const inference::ClusterResult& clusters) {
  const auto minority = clusters.inferred_minority();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < minority.size(); ++i)
    if (minority[i]) out.push_back(i);
  return out;
}

train::TrainTrace train_with_sampler(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels,
                                     const SamplingPlan& plan, const train::TrainConfig& config,
                                     const train::StepHook& hook) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (plan.size() != n) throw Error("sampling plan covers " + std::to_string(plan.size()) + " rows, dataset has " + std::to_string(n));
  PlanSampler sampler(plan, config.effective_batch(n), config.seed);
  return train::train(net, x, labels, sampler, config.total_steps(n), config, hook);
}

GdroState GdroState::uniform(std::size_t groups, double eta_q) {
  if (groups == 0) throw Error("GDRO needs at least one group");
  if (eta_q < 0.0) throw ConfigError("gdro eta_q must be nonnegative");
  return {std::vector<double>(groups, 1.0 / static_cast<double>(groups)), eta_q};
}

double gdro_step(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels, std::span<const int> groups,
                 const std::vector<std::size_t>& rows, GdroState& state, const train::TrainConfig& config) {
  const std::size_t g_count = state.q.size();
  const Matrix xb = train::gather_rows(x, rows);
  std::vector<int> yb(rows.size());
  std::vector<std::size_t> gb(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    yb[k] = labels[rows[k]];
    const int g = groups[rows[k]];
    if (g < 0 || static_cast<std::size_t>(g) >= g_count) throw Error("group id " + std::to_string(g) + " outside GDRO state");
    gb[k] = static_cast<std::size_t>(g);
  }
  const Vector losses = model::example_losses(net, config.loss, xb, yb);
  std::vector<double> group_loss(g_count, 0.0);
  std::vector<std::size_t> group_count(g_count, 0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    group_loss[gb[k]] += losses[static_cast<Eigen::Index>(k)];
    ++group_count[gb[k]];
  }
  double total = 0.0;
  for (std::size_t g = 0; g < g_count; ++g) {
    if (group_count[g] > 0) group_loss[g] /= static_cast<double>(group_count[g]);
    state.q[g] *= std::exp(state.eta_q * group_loss[g]);
    total += state.q[g];
  }
  for (auto& q : state.q) q /= total;
  std::vector<double> weights(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) weights[k] = state.q[gb[k]] / static_cast<double>(group_count[gb[k]]);
  std::vector<std::size_t> all(rows.size());
  std::iota(all.begin(), all.end(), 0);
  return train::train_step(net, xb, yb, all, config, weights);
}

train::TrainTrace train_gdro(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels,
                             std::span<const int> groups, GdroState& state, const train::TrainConfig& config,
                             const train::StepHook& hook) {
  config.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (groups.size() != n) throw Error("GDRO needs one group id per training row");
  auto source = train::EpochShuffler::over(n, config.effective_batch(n), config.seed);
  const std::size_t steps = config.total_steps(n);
  train::TrainTrace trace;
  if (hook) hook(0, net);
  for (std::size_t t = 1; t <= steps; ++t) {
    const double loss = gdro_step(net, x, labels, groups, source.next(), state, config);
    if (!std::isfinite(loss)) throw Error("GDRO training diverged at step " + std::to_string(t));
    trace.add(t, loss);
    if (hook) hook(t, net);
  }
  return trace;
}

}  // namespace spare::sampling
