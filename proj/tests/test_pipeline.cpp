#include "spare/pipeline.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace spare;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(
[run]
strategy = %STRATEGY%
seed = 3

[dataset]
source = synthetic

[synthetic]
d = 20
ambient_sigma = 0.1
core = -1:1:0.1, 1:1:0.1
spurious = -1:2:0.1, 1:2:0.1
groups = 1:1:40:maj, 1:-1:4, -1:-1:40:maj, -1:1:4
test_group_size = 10

[model]
m = 40

[train]
eta = 0.002
lr_convention = standard
epochs = 4
batch_size = 16
loss = l2

[spare]
t_init_epochs = 2

[theory]
checks = phase1, separability, assumption
probe_steps = 1, 2, 4, 8
separability_step = 5
coupling_steps = 5
)";

std::string config_text(const std::string& strategy) {
  std::string s = kSmall;
  s.replace(s.find("%STRATEGY%"), 10, strategy);
  return s;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("spare_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

class EveryStrategy : public ::testing::TestWithParam<std::string> {};

TEST_P(EveryStrategy, WritesRunLayoutAndEvaluates) {
  const auto dir = scratch(GetParam());
  auto c = config::parse(config_text(GetParam()));
  std::ostringstream log;
  const auto r = pipeline::run_train(c, dir, {}, log);
  for (const char* f : {"config.snapshot", "manifest.json", "metrics.csv", "metrics.json", "predictions_test.csv",
                        "checkpoints/final.spnn", "data/train.spds", "data/test.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(r.steps, 4u * 6);
  const auto& test = r.eval("test");
  EXPECT_GE(test.worst_group_accuracy, 0.0);
  EXPECT_LE(test.worst_group_accuracy, test.average_accuracy);
  std::ostringstream elog;
  const auto again = pipeline::run_evaluate(dir, "test", elog);
  EXPECT_EQ(again.average_accuracy, test.average_accuracy);
  EXPECT_EQ(again.worst_group_accuracy, test.worst_group_accuracy);
  EXPECT_EQ(again.adjusted_average_accuracy, test.adjusted_average_accuracy);
  EXPECT_THROW(pipeline::run_evaluate(dir, "val", elog), Error);
  fs::remove_all(dir);
}

INSTANTIATE_TEST_SUITE_P(Pipeline, EveryStrategy, ::testing::Values("erm", "cb", "gb", "spare", "jtt", "gdro"));

TEST(Pipeline, SpareWritesGroupsAndPlan) {
  const auto dir = scratch("groups");
  std::ostringstream log;
  const auto r = pipeline::run_train(config::parse(config_text("spare")), dir, {}, log);
  ASSERT_TRUE(r.clusters.has_value());
  ASSERT_TRUE(r.inference_quality.has_value());
  const auto groups = nlohmann::json::parse(slurp(dir / "groups.json"));
  EXPECT_EQ(groups["examples"].size(), 88u);
  EXPECT_EQ(groups["classes"].size(), 2u);
  const auto plan = nlohmann::json::parse(slurp(dir / "plan.json"));
  double total = 0;
  for (const auto& e : plan["examples"]) total += e["p"].get<double>();
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto header = slurp(dir / "metrics.csv").substr(0, slurp(dir / "metrics.csv").find('\n'));
  EXPECT_EQ(header, "epoch,split,avg_acc,adjusted_avg_acc,worst_group_acc,g(-1,-1),g(-1,1),g(1,-1),g(1,1)");
  fs::remove_all(dir);
}

TEST(Pipeline, StageOneOnlyStopsBeforeTraining) {
  const auto dir = scratch("stage1");
  std::ostringstream log;
  pipeline::run_train(config::parse(config_text("spare")), dir, {false, true}, log);
  EXPECT_TRUE(fs::exists(dir / "groups.json"));
  EXPECT_TRUE(fs::exists(dir / "checkpoints/stage1.spnn"));
  EXPECT_FALSE(fs::exists(dir / "checkpoints/final.spnn"));
  std::ostringstream elog;
  EXPECT_THROW(pipeline::run_evaluate(dir, "test", elog), Error);
  fs::remove_all(dir);
}

TEST(Pipeline, StrictRunsAreByteIdentical) {
  for (const char* strategy : {"spare", "gdro"}) {
    const auto a = scratch(std::string("det_a_") + strategy), b = scratch(std::string("det_b_") + strategy);
    auto c = config::parse(config_text(strategy));
    c.train.strict_determinism = true;
    std::ostringstream log;
    pipeline::run_train(c, a, {true, false}, log);
    pipeline::run_train(c, b, {true, false}, log);
    for (const char* f : {"metrics.csv", "metrics.json", "manifest.json", "checkpoints/final.spnn"})
      EXPECT_EQ(slurp(a / f), slurp(b / f)) << strategy << " " << f;
    if (std::string(strategy) == "spare") EXPECT_EQ(slurp(a / "groups.json"), slurp(b / "groups.json"));
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST(Pipeline, DifferentSeedsDiffer) {
  auto c = config::parse(config_text("erm"));
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  std::ostringstream log;
  pipeline::run_train(c, a, {}, log);
  c.seed = c.train.seed = 4;
  pipeline::run_train(c, b, {}, log);
  EXPECT_NE(slurp(a / "checkpoints/final.spnn"), slurp(b / "checkpoints/final.spnn"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, TheorySummaryAndGenerate) {
  const auto dir = scratch("theory");
  std::ostringstream log;
  const auto outcome = pipeline::run_theory(config::parse(config_text("erm")), dir, log);
  ASSERT_EQ(outcome.lines.size(), 3u);
  EXPECT_EQ(outcome.lines[0].name, "phase1");
  EXPECT_TRUE(fs::exists(dir / "theory/phase1.csv"));
  EXPECT_TRUE(fs::exists(dir / "theory/assumption.csv"));
  EXPECT_NE(log.str().find("phase1: slope_rel_err core="), std::string::npos);
  const auto gen = scratch("generate");
  const auto data = pipeline::run_generate(config::parse(config_text("erm")), gen, log);
  EXPECT_EQ(data.train.size(), 88u);
  EXPECT_TRUE(fs::exists(gen / "data/train.spds"));
  fs::remove_all(dir);
  fs::remove_all(gen);
}

TEST(Cli, ExitCodes) {
  const fs::path cli = SPARE_CLI_PATH;
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "ok.ini") << config_text("erm");
  std::ofstream(dir / "bad.ini") << config_text("erm") << "\n[model]\nwidth = 3\n";
  const auto run = [&](const std::string& args) {
    const int status = std::system((cli.string() + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(run("train --config " + (dir / "ok.ini").string() + " --out " + (dir / "run").string()), 0);
  EXPECT_EQ(run("evaluate --out " + (dir / "run").string() + " --split test"), 0);
  EXPECT_EQ(run("train --config " + (dir / "bad.ini").string() + " --out " + (dir / "x").string()), 1);
  EXPECT_EQ(run("evaluate --out " + (dir / "nowhere").string()), 2);
  EXPECT_EQ(run("train --config " + (dir / "ok.ini").string() + " --seed 9 --out " + (dir / "run9").string()), 0);
  EXPECT_NE(slurp(dir / "run/checkpoints/final.spnn"), slurp(dir / "run9/checkpoints/final.spnn"));
  fs::remove_all(dir);
}
