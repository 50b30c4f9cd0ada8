#pragma once

#include "spare/cmnist.hpp"
#include "spare/model.hpp"
#include "spare/sampling.hpp"
#include "spare/theory.hpp"
#include "spare/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace spare::config {

enum class Source : std::uint8_t { synthetic, cmnist };

struct FeatureSpec {
  int id = 0;
  double magnitude = 1.0;
  double sigma = 0.0;
  bool operator==(const FeatureSpec&) const = default;
};

struct SyntheticConfig {
  std::size_t d = 100;
  double ambient_sigma = 0.0;
  bool random_rotation = false;
  std::uint64_t rotation_seed = 0;
  std::vector<FeatureSpec> core;
  std::vector<FeatureSpec> spurious;
  std::vector<datagen::GroupSpec> groups;
  std::size_t test_group_size = 200;  // every group of the table, at this size, in the test split

  bool operator==(const SyntheticConfig&) const = default;
};

struct CmnistConfig {
  std::string mnist_dir = "data/mnist";
  double p_corr = 0.995;
  std::vector<std::string> palette = {"#ff0000", "#85ff00", "#00fff3", "#6e00ff", "#ff0018"};
  std::size_t train_size = 50000;
  std::size_t train_subset = 0;
  std::size_t val_subset = 0;
  std::size_t test_subset = 0;
  bool build_val = false;

  bool operator==(const CmnistConfig&) const = default;
};

enum class Stage2Init : std::uint8_t { fresh, resume };
enum class JttFlags : std::uint8_t { misclassified, clusters };
enum class GdroGroups : std::uint8_t { true_groups, inferred };

struct SpareConfig {
  std::size_t t_init_epochs = 2;
  model::LayerTag layer = model::LayerTag::last_layer_outputs;
  std::size_t k_min = 2;
  std::size_t k_max = 5;
  int lambda = 0;  // 0: silhouette rule
  sampling::Normalization normalization = sampling::Normalization::per_class;
  Stage2Init stage2_init = Stage2Init::fresh;

  bool operator==(const SpareConfig&) const = default;
};

struct JttConfig {
  std::size_t factor = 50;
  JttFlags flags = JttFlags::misclassified;
  bool operator==(const JttConfig&) const = default;
};

struct GdroConfig {
  double eta_q = 0.01;
  GdroGroups groups = GdroGroups::true_groups;
  bool operator==(const GdroConfig&) const = default;
};

struct TheoryChecks {
  bool phase1 = true;
  bool separability = true;
  bool phase2 = false;
  bool assumption = true;
  double alpha = 0.1;
  double c2 = 1.0;
  std::vector<std::size_t> probe_steps;
  std::size_t separability_step = 50;
  std::size_t coupling_steps = 100;
  double slope_tolerance = 0.15;
  double separability_min = 0.95;
  double domination_min = 5.0;
  double bound_slack = 0.1;
  double gap_max = 1e-2;

  bool operator==(const TheoryChecks&) const = default;
};

struct RunConfig {
  sampling::Strategy strategy = sampling::Strategy::erm;
  std::uint64_t seed = 0;
  bool save_data = true;
  bool eval_every_epoch = true;
  Source source = Source::synthetic;
  SyntheticConfig synthetic;
  CmnistConfig cmnist;
  std::size_t m = 2000;
  model::Activation activation = model::Activation::relu();
  std::size_t o = 0;  // 0: 1 for l2, number of classes for cross entropy
  train::TrainConfig train;
  SpareConfig spare;
  JttConfig jtt;
  GdroConfig gdro;
  TheoryChecks theory;

  bool operator==(const RunConfig&) const = default;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

RunConfig parse(const std::string& text);
RunConfig load(const std::filesystem::path& path);
std::string serialize(const RunConfig& config);

std::string to_string(Source s);

}  // namespace spare::config
