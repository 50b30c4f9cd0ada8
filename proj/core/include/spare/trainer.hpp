#pragma once

#include "spare/model.hpp"
#include "spare/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spare::train {

/// How `eta` maps to per-layer step sizes.
///   ntk:      W and Z both move by eta times their gradient.
///   standard: eta is the step size of the equivalent standard-parametrized
///             net (W' = W / sqrt(d), Z' = Z / sqrt(m)), i.e. W moves by
///             eta * d and Z by eta * m times their gradient.
enum class LrConvention : std::uint8_t { ntk, standard };

std::string to_string(LrConvention c);
LrConvention parse_lr_convention(const std::string& text);

struct TrainConfig {
  double eta = 0.05;
  std::size_t epochs = 0;
  std::size_t steps = 0;       // takes precedence over epochs when nonzero
  std::size_t batch_size = 0;  // 0 means full batch
  model::Loss loss = model::Loss::l2;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;  // multiplies both layers by (1 - eta * weight_decay) per step
  LrConvention lr_convention = LrConvention::ntk;
  bool strict_determinism = false;

  bool operator==(const TrainConfig&) const = default;

  void validate() const;
  std::size_t effective_batch(std::size_t n) const { return batch_size == 0 || batch_size > n ? n : batch_size; }
  std::size_t steps_per_epoch(std::size_t n) const;
  std::size_t total_steps(std::size_t n) const;
  double rate_w(std::size_t d) const;
  double rate_z(std::size_t m) const;
};

struct TrainRecord {
  std::size_t step = 0;
  double loss = 0.0;  // batch loss before the update of this step
};

struct TrainTrace {
  std::vector<TrainRecord> records;
  void add(std::size_t step, double loss);
};

/// Supplies row indices of the next mini-batch.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual std::vector<std::size_t> next() = 0;
  /// True when every batch is the whole dataset in order.
  virtual bool full_batch() const { return false; }
};

class FullBatch final : public BatchSource {
 public:
  explicit FullBatch(std::size_t n) : n_(n) {}
  std::vector<std::size_t> next() override;
  bool full_batch() const override { return true; }

 private:
  std::size_t n_;
};

/// Walks a fresh permutation of `pool` every epoch; the last batch of an
/// epoch may be shorter.
class EpochShuffler final : public BatchSource {
 public:
  EpochShuffler(std::vector<std::size_t> pool, std::size_t batch, std::uint64_t seed);
  static EpochShuffler over(std::size_t n, std::size_t batch, std::uint64_t seed);
  std::vector<std::size_t> next() override;
  std::size_t steps_per_epoch() const;

 private:
  std::vector<std::size_t> pool_;
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t cursor_;
  Rng rng_;
};

/// Called with the number of completed steps (0 before training) and the
/// current network.
using StepHook = std::function<void(std::size_t step, const model::TwoLayerNet& net)>;

/// One update on the rows `rows` of (x, labels). Returns the batch loss.
double train_step(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels,
                  const std::vector<std::size_t>& rows, const TrainConfig& config,
                  std::span<const double> example_weights = {});

TrainTrace train(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels, BatchSource& source,
                 std::size_t steps, const TrainConfig& config, const StepHook& hook = {});

/// Convenience: batches from FullBatch or EpochShuffler according to config.
TrainTrace train(model::TwoLayerNet& net, const Matrix& x, std::span<const int> labels,
                 const TrainConfig& config, const StepHook& hook = {});

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows);

}  // namespace spare::train
