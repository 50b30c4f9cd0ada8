#include "spare/pipeline.hpp"

#include "spare/dataset_io.hpp"
#include "spare/sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace spare::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using config::RunConfig;
using datagen::Dataset;
using datagen::GroupKey;

datagen::FeatureBank make_bank(const config::SyntheticConfig& s) {
  std::map<int, double> core_mag, spur_mag;
  datagen::NoiseLevels sig;
  for (const auto& f : s.core) {
    core_mag[f.id] = f.magnitude;
    sig.core[f.id] = f.sigma;
  }
  for (const auto& f : s.spurious) {
    spur_mag[f.id] = f.magnitude;
    sig.spurious[f.id] = f.sigma;
  }
  sig.ambient = s.ambient_sigma;
  return datagen::build_feature_bank(s.d, core_mag, spur_mag, sig, {s.random_rotation, s.rotation_seed});
}

DataBundle make_data(const RunConfig& c) {
  if (c.source == config::Source::synthetic) {
    const auto bank = make_bank(c.synthetic);
    std::vector<datagen::GroupSpec> test_groups = c.synthetic.groups;
    for (auto& g : test_groups) g.size = c.synthetic.test_group_size;
    return {datagen::generate_synthetic(bank, c.synthetic.groups, c.seed, datagen::Split::train), std::nullopt,
            datagen::generate_synthetic(bank, test_groups, c.seed, datagen::Split::test)};
  }
  cmnist::SplitOptions opt;
  opt.p_corr = c.cmnist.p_corr;
  opt.palette.clear();
  for (const auto& hex : c.cmnist.palette) opt.palette.push_back(cmnist::parse_rgb(hex));
  opt.train_size = c.cmnist.train_size;
  opt.train_subset = c.cmnist.train_subset;
  opt.val_subset = c.cmnist.val_subset;
  opt.test_subset = c.cmnist.test_subset;
  opt.build_val = c.cmnist.build_val;
  auto splits = cmnist::build_cmnist_splits(c.cmnist.mnist_dir, opt, c.seed);
  return {std::move(splits.train), std::move(splits.val), std::move(splits.test)};
}

std::size_t output_count(const RunConfig& c, const Dataset& train) {
  if (c.o != 0) return c.o;
  if (c.train.loss == model::Loss::l2) return 1;
  const auto classes = train.classes();
  return static_cast<std::size_t>(classes.empty() ? 0 : classes.back() + 1);
}

const metrics::EvalReport& RunResult::eval(const std::string& split) const {
  for (const auto& e : final_eval)
    if (e.split == split) return e.report;
  throw Error("no evaluation recorded for split " + split);
}

bool TheoryOutcome::pass() const {
  return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return !l.asserted || l.pass; });
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("malformed " + path.string() + ": " + e.what());
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::vector<std::pair<std::string, const Dataset*>> eval_splits(const DataBundle& data) {
  std::vector<std::pair<std::string, const Dataset*>> out;
  if (data.val) out.emplace_back("val", &*data.val);
  out.emplace_back("test", &data.test);
  return out;
}

std::map<GroupKey, std::size_t> train_sizes_for(const Dataset& train, const Dataset& eval) {
  auto sizes = train.group_counts();
  for (const auto& [g, n] : eval.group_counts()) sizes.try_emplace(g, 0);
  return sizes;
}

metrics::EvalReport evaluate_net(const model::TwoLayerNet& net, const Dataset& eval,
                                 const std::map<GroupKey, std::size_t>& train_sizes, std::vector<int>* preds_out = nullptr) {
  const auto preds = model::predict_labels(net.forward_batch(eval.x));
  auto sizes = train_sizes;
  for (const auto& [g, n] : eval.group_counts()) sizes.try_emplace(g, 0);
  auto report = metrics::evaluate(preds, eval, sizes);
  if (preds_out) *preds_out = preds;
  return report;
}

json report_json(const metrics::EvalReport& r) {
  json j;
  j["avg_acc"] = r.average_accuracy;
  j["adjusted_avg_acc"] = r.adjusted_average_accuracy;
  j["worst_group_acc"] = r.worst_group_accuracy;
  j["worst_group_error"] = 1.0 - r.worst_group_accuracy;
  json groups = json::object();
  for (const auto& [g, t] : r.per_group)
    groups[metrics::group_name(g)] = {{"correct", t.correct}, {"total", t.total}, {"acc", t.accuracy()}};
  j["per_group"] = groups;
  return j;
}

void write_predictions(const fs::path& path, const Dataset& data, const std::vector<int>& preds) {
  std::ostringstream os;
  os << "id,label,group_class,group_spurious,prediction\n";
  for (std::size_t i = 0; i < data.size(); ++i)
    os << data.ids[i] << ',' << data.labels[i] << ',' << data.groups[i].class_id << ',' << data.groups[i].spurious_id << ','
       << preds[i] << '\n';
  write_text(path, os.str());
}

class MetricsCsv {
 public:
  explicit MetricsCsv(const DataBundle& data) {
    for (const auto& [name, d] : eval_splits(data))
      for (const auto& [g, n] : d->group_counts()) columns_.insert(g);
    os_ << "epoch,split,avg_acc,adjusted_avg_acc,worst_group_acc";
    for (const auto& g : columns_) os_ << ',' << metrics::group_name(g);
    os_ << '\n';
    os_ << std::setprecision(17);
  }

  void add(std::size_t epoch, const std::string& split, const metrics::EvalReport& r) {
    os_ << epoch << ',' << split << ',' << r.average_accuracy << ',' << r.adjusted_average_accuracy << ','
        << r.worst_group_accuracy;
    for (const auto& g : columns_) {
      os_ << ',';
      const auto it = r.per_group.find(g);
      if (it != r.per_group.end()) os_ << it->second.accuracy();
    }
    os_ << '\n';
  }

  std::string str() const { return os_.str(); }

 private:
  std::set<GroupKey> columns_;
  std::ostringstream os_;
};

json groups_json(const inference::ClusterResult& clusters, const Dataset& train, const sampling::SamplingPlan* plan) {
  json j;
  j["t_init_steps"] = clusters.t_init;
  j["layer"] = model::to_string(clusters.layer);
  json classes = json::array();
  for (const auto& c : clusters.classes) {
    json profile = json::array();
    for (std::size_t k = 0; k < c.k_choice.candidates.size(); ++k)
      profile.push_back({{"k", c.k_choice.candidates[k]}, {"mean_silhouette", c.k_choice.mean_silhouette[k]}});
    classes.push_back({{"class", c.class_id},
                       {"k", c.k},
                       {"mean_silhouette", c.mean_silhouette},
                       {"lambda", c.lambda},
                       {"cluster_sizes", c.cluster_sizes()},
                       {"k_profile", profile},
                       {"warning", c.k_choice.warning}});
  }
  j["classes"] = classes;
  const auto cluster_of = clusters.cluster_of();
  json examples = json::object();
  for (std::size_t i = 0; i < train.size(); ++i) {
    json e = {{"class", train.labels[i]}, {"cluster", cluster_of[i]}};
    if (plan) e["weight"] = plan->weights[i];
    examples[std::to_string(train.ids[i])] = e;
  }
  j["examples"] = examples;
  return j;
}

json plan_json(const sampling::SamplingPlan& plan, const Dataset& train) {
  json j;
  j["strategy"] = sampling::to_string(plan.strategy);
  json lambdas = json::object();
  for (const auto& [c, l] : plan.lambdas) lambdas[std::to_string(c)] = l;
  j["lambdas"] = lambdas;
  json ex = json::array();
  for (std::size_t i = 0; i < plan.size(); ++i) ex.push_back({{"id", train.ids[i]}, {"w", plan.weights[i]}, {"p", plan.probabilities[i]}});
  j["examples"] = ex;
  return j;
}

std::vector<bool> true_minority(const Dataset& d) {
  auto mask = d.majority_mask();
  mask.flip();
  return mask;
}

metrics::EvalReport inference_quality(const inference::ClusterResult& clusters, const Dataset& train) {
  metrics::EvalReport r;
  const auto inferred = clusters.inferred_minority();
  const auto truth = true_minority(train);
  r.minority_recall = metrics::minority_recall(inferred, truth);
  r.minority_in_majority_count = metrics::minority_in_majority(inferred, truth);
  r.majority_in_minority_fraction = metrics::majority_in_minority(inferred, truth);
  const auto global = clusters.global_group_of();
  std::vector<int> spurious(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) spurious[i] = train.groups[i].spurious_id;
  r.cramers_v["class"] = metrics::cramers_v(train.labels, global).value;
  r.cramers_v["spurious"] = metrics::cramers_v(spurious, global).value;
  return r;
}

json inference_json(const metrics::EvalReport& q) {
  json j;
  j["minority_recall"] = q.minority_recall ? json(*q.minority_recall) : json(nullptr);
  j["minority_in_majority_count"] = q.minority_in_majority_count ? json(*q.minority_in_majority_count) : json(nullptr);
  j["majority_in_minority_fraction"] = q.majority_in_minority_fraction ? json(*q.majority_in_minority_fraction) : json(nullptr);
  json v = json::object();
  for (const auto& [k, val] : q.cramers_v) v[k] = val;
  j["cramers_v"] = v;
  return j;
}

json manifest_json(const RunConfig& c, const DataBundle& data, const RunOptions& options) {
  json j;
  j["tool"] = "spare";
  j["version"] = "0.1.0";
  j["seed"] = c.seed;
  j["strategy"] = sampling::to_string(c.strategy);
  j["source"] = config::to_string(c.source);
  j["strict_determinism"] = options.strict_determinism;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION);
  j["data_saved"] = c.save_data;
  j["n_train"] = data.train.size();
  j["d"] = data.train.dim();
  json sizes = json::array();
  for (const auto& [g, n] : data.train.group_counts()) sizes.push_back({{"class", g.class_id}, {"spurious", g.spurious_id}, {"size", n}});
  j["train_group_sizes"] = sizes;
  json splits = json::array({"train"});
  if (data.val) splits.push_back("val");
  splits.push_back("test");
  j["splits"] = splits;
  j["streams"] = {{"init", "seed"}, {"shuffle", "seed"}, {"sampler", "seed"}, {"kmeans", "seed"}};
  return j;
}

struct Stage1 {
  model::TwoLayerNet net;
  inference::ClusterResult clusters;
};

Stage1 run_stage1(const RunConfig& c, const Dataset& train, std::size_t o, std::ostream& log) {
  auto cfg = c.train;
  cfg.epochs = c.spare.t_init_epochs;
  cfg.steps = 0;
  Stage1 s{model::init_symmetric(c.m, train.dim(), o, c.activation, c.seed), {}};
  train::train(s.net, train.x, train.labels, cfg);
  inference::InferenceOptions opt;
  opt.k_min = c.spare.k_min;
  opt.k_max = c.spare.k_max;
  opt.seed = c.seed;
  opt.lambda_override = c.spare.lambda;
  s.clusters = inference::infer_groups(s.net, train, cfg.total_steps(train.size()), c.spare.layer, opt);
  for (const auto& cc : s.clusters.classes)
    log << "stage1 class " << cc.class_id << ": k=" << cc.k << " mean_silhouette=" << fmt(cc.mean_silhouette)
        << " lambda=" << cc.lambda << '\n';
  return s;
}

}  // namespace

DataBundle run_generate(const RunConfig& c, const fs::path& out, std::ostream& log) {
  DataBundle data = make_data(c);
  io::save_dataset(data.train, out / "data" / "train");
  if (data.val) io::save_dataset(*data.val, out / "data" / "val");
  io::save_dataset(data.test, out / "data" / "test");
  write_text(out / "config.snapshot", config::serialize(c));
  for (const auto& [name, d] : std::vector<std::pair<std::string, const Dataset*>>{{"train", &data.train}}) {
    log << name << ": n=" << d->size() << " d=" << d->dim() << '\n';
    std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // majority, total
    const auto mask = d->majority_mask();
    for (std::size_t i = 0; i < d->size(); ++i) {
      auto& pc = per_class[d->labels[i]];
      pc.first += mask[i];
      ++pc.second;
    }
    log << "  class  spurious  size  majority\n";
    for (const auto& g : d->group_table)
      log << "  " << std::setw(5) << g.class_id << "  " << std::setw(8) << g.spurious_id << "  " << std::setw(5) << g.size << "  "
          << (g.is_majority ? "yes" : "no") << '\n';
    for (const auto& [c2, pc] : per_class)
      log << "  class " << c2 << " majority fraction " << fmt(static_cast<double>(pc.first) / static_cast<double>(pc.second)) << '\n';
  }
  log << "test: n=" << data.test.size() << '\n';
  return data;
}

RunResult run_train(const RunConfig& c, const fs::path& out, const RunOptions& options, std::ostream& log) {
  c.validate();
  fs::create_directories(out);
  write_text(out / "config.snapshot", config::serialize(c));
  const DataBundle data = make_data(c);
  write_text(out / "manifest.json", manifest_json(c, data, options).dump(2) + "\n");
  if (c.save_data) {
    io::save_dataset(data.train, out / "data" / "train");
    if (data.val) io::save_dataset(*data.val, out / "data" / "val");
    io::save_dataset(data.test, out / "data" / "test");
  }
  const Dataset& train = data.train;
  const std::size_t n = train.size();
  const std::size_t o = output_count(c, train);
  log << "train n=" << n << " d=" << train.dim() << " o=" << o << " strategy=" << sampling::to_string(c.strategy) << '\n';

  RunResult result;
  json metrics_doc;
  metrics_doc["strategy"] = sampling::to_string(c.strategy);
  metrics_doc["seed"] = c.seed;

  std::optional<Stage1> stage1;
  const bool needs_stage1 = options.stage1_only || c.strategy == sampling::Strategy::spare ||
                            (c.strategy == sampling::Strategy::jtt && c.jtt.flags == config::JttFlags::clusters) ||
                            (c.strategy == sampling::Strategy::gdro && c.gdro.groups == config::GdroGroups::inferred);
  const bool needs_reference = c.strategy == sampling::Strategy::jtt && c.jtt.flags == config::JttFlags::misclassified;
  std::optional<sampling::SamplingPlan> plan;
  if (needs_stage1) {
    stage1 = run_stage1(c, train, o, log);
    model::save_checkpoint(stage1->net, out / "checkpoints" / "stage1.spnn");
    const auto quality = inference_quality(stage1->clusters, train);
    if (quality.minority_recall) log << "stage1 minority recall " << fmt(*quality.minority_recall) << '\n';
    metrics_doc["inference"] = inference_json(quality);
    result.inference_quality = quality;
    result.clusters = stage1->clusters;
    if (c.strategy == sampling::Strategy::spare || options.stage1_only)
      plan = sampling::spare_weights(stage1->clusters, sampling::lambdas_of(stage1->clusters), c.spare.normalization);
    write_text(out / "groups.json", groups_json(stage1->clusters, train, plan ? &*plan : nullptr).dump(2) + "\n");
    if (plan) write_text(out / "plan.json", plan_json(*plan, train).dump(2) + "\n");
  }
  if (options.stage1_only) {
    write_text(out / "metrics.json", metrics_doc.dump(2) + "\n");
    return result;
  }

  auto net = (c.strategy == sampling::Strategy::spare && c.spare.stage2_init == config::Stage2Init::resume && stage1)
                 ? stage1->net
                 : model::init_symmetric(c.m, train.dim(), o, c.activation, c.seed);

  MetricsCsv csv(data);
  const std::size_t per_epoch = c.train.steps_per_epoch(n);
  const auto splits = eval_splits(data);
  auto hook = [&](std::size_t step, const model::TwoLayerNet& current) {
    if (!c.eval_every_epoch || step == 0 || per_epoch == 0 || step % per_epoch != 0) return;
    for (const auto& [name, d] : splits) csv.add(step / per_epoch, name, evaluate_net(current, *d, train.group_counts()));
  };

  switch (c.strategy) {
    case sampling::Strategy::erm: train::train(net, train.x, train.labels, c.train, hook); break;
    case sampling::Strategy::cb:
      plan = sampling::class_balance_plan(train.labels);
      sampling::train_with_sampler(net, train.x, train.labels, *plan, c.train, hook);
      break;
    case sampling::Strategy::gb:
      plan = sampling::group_balance_plan(train.group_indices());
      sampling::train_with_sampler(net, train.x, train.labels, *plan, c.train, hook);
      break;
    case sampling::Strategy::spare:
      sampling::train_with_sampler(net, train.x, train.labels, *plan, c.train, hook);
      break;
    case sampling::Strategy::jtt: {
      std::vector<std::size_t> flagged;
      if (needs_reference) {
        auto cfg = c.train;
        cfg.epochs = c.spare.t_init_epochs;
        cfg.steps = 0;
        auto reference = model::init_symmetric(c.m, train.dim(), o, c.activation, c.seed);
        train::train(reference, train.x, train.labels, cfg);
        model::save_checkpoint(reference, out / "checkpoints" / "reference.spnn");
        flagged = sampling::misclassified_rows(reference, train.x, train.labels);
      } else {
        flagged = sampling::minority_rows(stage1->clusters);
      }
      log << "jtt flagged " << flagged.size() << " rows, factor " << c.jtt.factor << '\n';
      train::EpochShuffler source(sampling::jtt_upsample(n, flagged, c.jtt.factor), c.train.effective_batch(n), c.seed);
      train::train(net, train.x, train.labels, source, c.train.total_steps(n), c.train, hook);
      break;
    }
    case sampling::Strategy::gdro: {
      std::vector<int> groups;
      std::size_t count = 0;
      if (c.gdro.groups == config::GdroGroups::inferred) {
        groups = stage1->clusters.global_group_of();
        count = stage1->clusters.global_group_count();
      } else {
        groups = train.group_indices();
        count = train.group_table.size();
      }
      auto state = sampling::GdroState::uniform(count, c.gdro.eta_q);
      sampling::train_gdro(net, train.x, train.labels, groups, state, c.train, hook);
      metrics_doc["gdro_q"] = state.q;
      break;
    }
  }
  if (plan && c.strategy != sampling::Strategy::spare) write_text(out / "plan.json", plan_json(*plan, train).dump(2) + "\n");
  result.steps = c.train.total_steps(n);
  model::save_checkpoint(net, out / "checkpoints" / "final.spnn");

  const std::size_t final_epoch = per_epoch == 0 ? 0 : (result.steps + per_epoch - 1) / per_epoch;
  json finals = json::object();
  for (const auto& [name, d] : splits) {
    std::vector<int> preds;
    auto report = evaluate_net(net, *d, train.group_counts(), &preds);
    if (!c.eval_every_epoch || result.steps % std::max<std::size_t>(per_epoch, 1) != 0) csv.add(final_epoch, name, report);
    write_predictions(out / ("predictions_" + name + ".csv"), *d, preds);
    finals[name] = report_json(report);
    log << name << ": avg_acc=" << fmt(report.average_accuracy) << " worst_group_acc=" << fmt(report.worst_group_accuracy)
        << " adjusted_avg_acc=" << fmt(report.adjusted_average_accuracy) << '\n';
    result.final_eval.push_back({name, std::move(report)});
  }
  metrics_doc["steps"] = result.steps;
  metrics_doc["final"] = finals;
  write_text(out / "metrics.csv", csv.str());
  write_text(out / "metrics.json", metrics_doc.dump(2) + "\n");
  return result;
}

metrics::EvalReport run_evaluate(const fs::path& run_dir, const std::string& split, std::ostream& log) {
  const auto ckpt = run_dir / "checkpoints" / "final.spnn";
  if (!fs::exists(ckpt)) throw Error("no checkpoint at " + ckpt.string() + "; run `spare train` first");
  const auto snapshot = run_dir / "config.snapshot";
  if (!fs::exists(snapshot)) throw Error("run directory lacks config.snapshot: " + run_dir.string());
  const auto c = config::load(snapshot);
  const auto manifest = read_json(run_dir / "manifest.json");
  const auto net = model::load_checkpoint(ckpt);

  std::map<GroupKey, std::size_t> train_sizes;
  for (const auto& g : manifest.at("train_group_sizes"))
    train_sizes[{g.at("class").get<int>(), g.at("spurious").get<int>()}] = g.at("size").get<std::size_t>();

  Dataset data;
  const auto stem = run_dir / "data" / split;
  if (fs::exists(fs::path(stem).concat(".spds"))) {
    data = io::load_dataset(stem);
  } else {
    auto bundle = make_data(c);
    if (split == "train") data = std::move(bundle.train);
    else if (split == "test") data = std::move(bundle.test);
    else if (split == "val" && bundle.val) data = std::move(*bundle.val);
    else throw Error("run has no split '" + split + "'");
  }
  std::vector<int> preds;
  auto report = evaluate_net(net, data, train_sizes, &preds);
  write_predictions(run_dir / ("predictions_" + split + ".csv"), data, preds);
  json doc;
  doc["split"] = split;
  doc["report"] = report_json(report);
  write_text(run_dir / ("eval_" + split + ".json"), doc.dump(2) + "\n");
  log << split << ": avg_acc=" << fmt(report.average_accuracy) << " worst_group_acc=" << fmt(report.worst_group_accuracy)
      << " adjusted_avg_acc=" << fmt(report.adjusted_average_accuracy) << '\n';
  return report;
}

TheoryOutcome run_theory(const RunConfig& c, const fs::path& out, std::ostream& log) {
  if (c.source != config::Source::synthetic) throw ConfigError("theory checks need dataset.source = synthetic");
  if (c.train.loss != model::Loss::l2) throw ConfigError("theory checks need train.loss = l2");
  const auto& th = c.theory;
  TheoryOutcome outcome;
  const Dataset data = make_data(c).train;
  fs::create_directories(out / "theory");
  write_text(out / "config.snapshot", config::serialize(c));
  if (data.size() < data.dim()) outcome.warnings.push_back("n < d: the early-time analysis assumes n >= d");
  if (c.m < data.dim()) outcome.warnings.push_back("m < d: the early-time analysis assumes m >= d");
  const auto input = datagen::check_input_distribution(data, c.m, th.alpha);
  if (!input.ok()) outcome.warnings.push_back("input distribution: " + input.summary());

  const model::NetConfig net{c.m, c.activation, c.seed};
  theory::TheoryConfig tc;
  tc.alpha = th.alpha;
  tc.c2 = th.c2;
  tc.probe_steps = th.probe_steps;
  tc.separability_step = th.separability_step;
  tc.coupling_steps = th.coupling_steps;

  if (th.phase1) {
    const auto report = theory::phase1_check(data, net, c.train, tc);
    theory::write_phase1_csv(report, out / "theory" / "phase1.csv");
    double core = 0.0, spur = 0.0;
    bool spur_any = false, null_ok = true;
    for (const auto& s : report.slopes) {
      if (s.feature.starts_with("core:")) {
        core = std::max(core, s.relative_error.value_or(0.0));
      } else if (s.relative_error) {
        spur = std::max(spur, *s.relative_error);
        spur_any = true;
      } else if (std::abs(s.fitted) > report.noise_floor) {
        null_ok = false;
      }
    }
    CheckLine line{"phase1", "slope_rel_err core=" + fmt(core) + ", spurious=" + (spur_any ? fmt(spur) : std::string("n/a")) +
                                 " noise_floor=" + fmt(report.noise_floor)};
    line.pass = core <= th.slope_tolerance && spur <= th.slope_tolerance && null_ok;
    outcome.lines.push_back(line);
  }
  if (th.separability) {
    const auto scores = theory::separability_at(data, net, c.train, th.separability_step);
    theory::write_separability_csv(scores, th.separability_step, out / "theory" / "separability.csv");
    double worst = 1.0, recall = 1.0;
    for (const auto& s : scores) {
      if (s.score) worst = std::min(worst, *s.score);
      if (s.minority_recall) recall = std::min(recall, *s.minority_recall);
    }
    CheckLine line{"separability", "t=" + std::to_string(th.separability_step) + " min_score=" + fmt(worst) + " min_minority_recall=" + fmt(recall)};
    line.pass = worst >= th.separability_min;
    outcome.lines.push_back(line);
  }
  if (th.phase2) {
    const auto report = theory::phase2_domination(data, net, c.train, tc);
    theory::write_domination_csv(report, out / "theory" / "phase2.csv");
    for (const auto& w : report.warnings) outcome.warnings.push_back("phase2: " + w);
    double ratio = std::numeric_limits<double>::infinity(), closed = ratio, excess = -ratio;
    for (const auto& dc : report.classes) {
      ratio = std::min(ratio, dc.ratio);
      closed = std::min(closed, dc.closed_form_ratio);
      excess = std::max(excess, std::abs(dc.f_core) - (dc.bound + th.bound_slack));
    }
    CheckLine line{"phase2", "T=" + std::to_string(report.steps) + " ratio=" + fmt(ratio) + " closed_form_ratio=" + fmt(closed) +
                                 " core_bound_margin=" + fmt(-excess)};
    line.asserted = report.hypothesis_met;
    line.pass = ratio >= th.domination_min && closed >= th.domination_min && excess <= 0.0;
    outcome.lines.push_back(line);
  }
  if (th.assumption) {
    const auto report = theory::assumption_check(data, net, c.train, th.coupling_steps);
    theory::write_assumption_csv(report, out / "theory" / "assumption.csv");
    const double tg = *std::max_element(report.train_gap.begin(), report.train_gap.end());
    const double cg = *std::max_element(report.core_gap.begin(), report.core_gap.end());
    const double sg = *std::max_element(report.spurious_gap.begin(), report.spurious_gap.end());
    CheckLine line{"assumption", "t<=" + std::to_string(th.coupling_steps) + " train_gap=" + fmt(tg) + " core_gap=" + fmt(cg) +
                                     " spurious_gap=" + fmt(sg)};
    line.pass = tg <= th.gap_max && cg <= th.gap_max && sg <= th.gap_max;
    outcome.lines.push_back(line);
  }
  std::ostringstream summary;
  for (const auto& w : outcome.warnings) summary << "warning: " << w << '\n';
  for (const auto& l : outcome.lines)
    summary << l.name << ": " << l.detail << ' ' << (!l.asserted ? "REPORTED" : l.pass ? "PASS" : "FAIL") << '\n';
  write_text(out / "theory" / "summary.txt", summary.str());
  log << summary.str();
  return outcome;
}

}  // namespace spare::pipeline
