#include "spare/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spare::train {

std::string to_string(LrConvention c) { return c == LrConvention::ntk ? "ntk" : "standard"; }

LrConvention parse_lr_convention(const std::string& text) {
  if (text == "ntk") return LrConvention::ntk;
  if (text == "standard") return LrConvention::standard;
  throw ConfigError("unknown lr_convention '" + text + "' (expected ntk or standard)");
}

void TrainConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("train.eta must be a positive finite number");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be nonnegative");
}

std::size_t TrainConfig::steps_per_epoch(std::size_t n) const {
  const std::size_t b = effective_batch(n);
  return b == 0 ? 0 : (n + b - 1) / b;
}

std::size_t TrainConfig::total_steps(std::size_t n) const { return steps != 0 ? steps : epochs * steps_per_epoch(n); }

double TrainConfig::rate_w(std::size_t d) const {
  return lr_convention == LrConvention::ntk ? eta : eta * static_cast<double>(d);
}

double TrainConfig::rate_z(std::size_t m) const {
  return lr_convention == LrConvention::ntk ? eta : eta * static_cast<double>(m);
}

void TrainTrace::add(std::size_t step, double loss) {
  if (!records.empty() && step <= records.back().step) throw Error("train trace steps must strictly increase");
  records.push_back({step, loss});
}

std::vector<std::size_t> FullBatch::next() {
  std::vector<std::size_t> rows(n_);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

EpochShuffler::EpochShuffler(std::vector<std::size_t> pool, std::size_t batch, std::uint64_t seed)
    : pool_(std::move(pool)), batch_(batch), cursor_(0), rng_(make_rng(seed, Stream::shuffle)) {
  if (pool_.empty()) throw Error("cannot shuffle an empty training set");
  if (batch_ == 0 || batch_ > pool_.size()) batch_ = pool_.size();
  cursor_ = pool_.size();
}

EpochShuffler EpochShuffler::over(std::size_t n, std::size_t batch, std::uint64_t seed) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  return EpochShuffler(std::move(pool), batch, seed);
}

std::size_t EpochShuffler::steps_per_epoch() const { return (pool_.size() + batch_ - 1) / batch_; }

std::vector<std::size_t> EpochShuffler::next() {
  if (cursor_ >= pool_.size()) {
    order_ = pool_;
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  const std::size_t end = std::min(cursor_ + batch_, order_.size());
  std::vector<std::size_t> rows(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return rows;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

namespace {

double update(model::TwoLayerNet& net, const Matrix& xb, std::span<const int> yb, const TrainConfig& config,
              std::span<const double> weights) {
  const model::Gradient g = model::loss_gradient(net, config.loss, xb, yb, weights);
  if (config.weight_decay > 0.0) {
    const double keep = 1.0 - config.eta * config.weight_decay;
    net.w *= keep;
    net.z *= keep;
  }
  model::apply_gradient(net, g, config.rate_w(net.d()), config.rate_z(net.m()));
  return g.loss;
}

}  // namespace

double train_step(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels,
                  const std::vector<std::size_t>& rows, const TrainConfig& config,
                  std::span<const double> example_weights) {
  std::vector<int> yb(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) yb[k] = labels[rows[k]];
  return update(net, gather_rows(x, rows), yb, config, example_weights);
}

TrainTrace train(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels, BatchSource& source,
                 std::size_t steps, const TrainConfig& config, const StepHook& hook) {
  config.validate();
  TrainTrace trace;
  if (hook) hook(0, net);
  for (std::size_t t = 1; t <= steps; ++t) {
    double batch_loss = 0.0;
    if (source.full_batch()) {
      batch_loss = update(net, x, labels, config, {});
    } else {
      batch_loss = train_step(net, x, labels, source.next(), config);
    }
    if (!std::isfinite(batch_loss)) throw Error("training diverged at step " + std::to_string(t) + " (non-finite loss)");
    trace.add(t, batch_loss);
    if (hook) hook(t, net);
  }
  return trace;
}

TrainTrace train(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels, const TrainConfig& config,
                 const StepHook& hook) {
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t steps = config.total_steps(n);
  if (config.effective_batch(n) == n) {
    FullBatch source(n);
    return train(net, x, labels, source, steps, config, hook);
  }
  auto source = EpochShuffler::over(n, config.batch_size, config.seed);
  return train(net, x, labels, source, steps, config, hook);
}

}  // namespace spare::train
