#include "spare/config.hpp"
#include "spare/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum Exit : int { ok = 0, config_error = 1, runtime_error = 2, check_failed = 3 };

struct Common {
  std::string config;
  std::string out = "runs/default";
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "INI run configuration");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Run directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Override run.seed");
  cmd->add_flag("--strict-determinism", c.strict, "Single-threaded, fixed reduction order");
}

spare::config::RunConfig load_config(const Common& c) {
  auto cfg = spare::config::load(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  cfg.train.strict_determinism = cfg.train.strict_determinism || c.strict;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-layer network training with group inference and spurious-feature diagnostics"};
  app.require_subcommand(1);

  Common common;
  std::string split = "test";

  auto* generate = app.add_subcommand("generate", "Build the datasets of a config and write them to <out>/data");
  add_common(generate, common);
  auto* train = app.add_subcommand("train", "Train with the configured strategy");
  add_common(train, common);
  auto* infer = app.add_subcommand("infer-groups", "Run the short first stage and cluster network outputs per class");
  add_common(infer, common);
  auto* evaluate = app.add_subcommand("evaluate", "Re-evaluate the final checkpoint of a run directory");
  add_common(evaluate, common, false);
  evaluate->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
  auto* theory = app.add_subcommand("theory", "Check early-training feature dynamics against their predictions");
  add_common(theory, common);

  CLI11_PARSE(app, argc, argv);

  try {
    namespace pl = spare::pipeline;
    const std::filesystem::path out = common.out;
    if (generate->parsed()) {
      pl::run_generate(load_config(common), out, std::cout);
    } else if (train->parsed()) {
      pl::run_train(load_config(common), out, {common.strict, false}, std::cout);
    } else if (infer->parsed()) {
      pl::run_train(load_config(common), out, {common.strict, true}, std::cout);
    } else if (evaluate->parsed()) {
      pl::run_evaluate(out, split, std::cout);
    } else if (theory->parsed()) {
      if (!pl::run_theory(load_config(common), out, std::cout).pass()) return check_failed;
    }
  } catch (const spare::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return runtime_error;
  }
  return ok;
}
