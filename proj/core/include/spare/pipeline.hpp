#pragma once

#include "spare/config.hpp"
#include "spare/inference.hpp"
#include "spare/metrics.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spare::pipeline {

struct DataBundle {
  datagen::Dataset train;
  std::optional<datagen::Dataset> val;
  datagen::Dataset test;
};

datagen::FeatureBank make_bank(const config::SyntheticConfig& s);

/// Synthetic splits share one feature bank; the test split holds every group
/// of the table at test_group_size examples.
DataBundle make_data(const config::RunConfig& config);

std::size_t output_count(const config::RunConfig& config, const datagen::Dataset& train);

struct SplitEval {
  std::string split;
  metrics::EvalReport report;
};

struct RunResult {
  std::vector<SplitEval> final_eval;
  std::optional<inference::ClusterResult> clusters;
  std::optional<metrics::EvalReport> inference_quality;
  std::size_t steps = 0;

  const metrics::EvalReport& eval(const std::string& split) const;
};

struct RunOptions {
  bool strict_determinism = false;
  bool stage1_only = false;  // stop after group inference
};

/// Trains according to config.strategy and fills `out` with the run layout:
/// config.snapshot, manifest.json, data/, checkpoints/, groups.json,
/// plan.json, metrics.csv, metrics.json, predictions_<split>.csv.
RunResult run_train(const config::RunConfig& config, const std::filesystem::path& out, const RunOptions& options,
                    std::ostream& log);

/// Writes the datasets of the config to `out`/data and prints group tables.
DataBundle run_generate(const config::RunConfig& config, const std::filesystem::path& out, std::ostream& log);

/// Re-evaluates the final checkpoint of a run directory on `split`, using
/// only files inside the run directory. Writes eval_<split>.json and
/// predictions_<split>.csv.
metrics::EvalReport run_evaluate(const std::filesystem::path& run_dir, const std::string& split, std::ostream& log);

struct CheckLine {
  std::string name;
  std::string detail;
  bool asserted = true;  // false: reported only
  bool pass = true;
};

struct TheoryOutcome {
  std::vector<CheckLine> lines;
  std::vector<std::string> warnings;
  bool pass() const;
};

TheoryOutcome run_theory(const config::RunConfig& config, const std::filesystem::path& out, std::ostream& log);

}  // namespace spare::pipeline
