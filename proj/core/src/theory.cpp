#include "spare/theory.hpp"

#include "spare/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>

namespace spare::theory {

void TheoryConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 0.25)) throw ConfigError("theory.alpha must lie in (0, 0.25)");
  if (!(c2 > 0.0)) throw ConfigError("theory.c2 must be positive");
  if (!std::is_sorted(probe_steps.begin(), probe_steps.end()) ||
      std::adjacent_find(probe_steps.begin(), probe_steps.end()) != probe_steps.end())
    throw ConfigError("theory.probe_steps must be strictly increasing");
}

std::vector<std::size_t> early_window(std::size_t d, double eta, std::size_t points) {
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  const auto end = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.5 * std::sqrt(static_cast<double>(d) / eta))));
  std::set<std::size_t> grid{1, end};
  const double ratio = points > 1 ? std::pow(static_cast<double>(end), 1.0 / static_cast<double>(points - 1)) : 1.0;
  double t = 1.0;
  for (std::size_t k = 0; k < points; ++k, t *= ratio) grid.insert(std::min(end, static_cast<std::size_t>(std::llround(t))));
  return {grid.begin(), grid.end()};
}

std::size_t phase2_steps(std::size_t d, double eta, double c2) {
  if (!(eta > 0.0) || !(c2 > 0.0)) throw ConfigError("eta and c2 must be positive");
  const double dd = static_cast<double>(d);
  return static_cast<std::size_t>(std::llround(c2 * dd * std::log(dd) / eta));
}

double probe_feature(const model::TwoLayerNet& net, const Vector& v) {
  if (net.o() != 1) throw Error("probing needs a scalar network head");
  return net.forward(v)[0];
}

double probe_feature(const linear::LinearModel& model, const Vector& v, const linear::PsiConstants& k) {
  return linear::linear_forward(model, v, k);
}

const FeatureSlope& PhaseReport::slope(const std::string& feature) const {
  for (const auto& s : slopes)
    if (s.feature == feature) return s;
  throw Error("no slope recorded for feature " + feature);
}

namespace {

void require_binary(const datagen::Dataset& data) {
  if (!data.bank) throw Error("theory checks need a synthetic dataset with a feature bank");
  for (int y : data.labels)
    if (y != 1 && y != -1) throw Error("theory checks need labels +-1");
}

double sign_of(int c) { return c >= 0 ? 1.0 : -1.0; }

train::TrainConfig full_batch(train::TrainConfig c) {
  c.batch_size = 0;
  c.loss = model::Loss::l2;
  c.weight_decay = 0.0;
  c.lr_convention = train::LrConvention::ntk;
  return c;
}

}  // namespace

std::map<std::string, double> predicted_slopes(const datagen::Dataset& data, double eta, double zeta) {
  require_binary(data);
  const auto& bank = *data.bank;
  const double n = static_cast<double>(data.size());
  const double d = static_cast<double>(data.dim());
  const double scale = 2.0 * eta * zeta * zeta / d;
  std::map<std::string, double> out;
  const auto classes = data.class_counts();
  for (const auto& [c, v] : bank.core) {
    const auto it = classes.find(c);
    const double nc = it == classes.end() ? 0.0 : static_cast<double>(it->second);
    out[linear::core_label(c)] = scale * sign_of(c) * v.squaredNorm() * nc / n;
  }
  std::map<int, double> imbalance;
  for (const auto& [g, count] : data.group_counts()) imbalance[g.spurious_id] += sign_of(g.class_id) * static_cast<double>(count);
  for (const auto& [s, v] : bank.spurious) out[linear::spurious_label(s)] = scale * v.squaredNorm() * imbalance[s] / n;
  return out;
}

double fit_slope_through_origin(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.empty()) throw Error("slope fit needs matching nonempty series");
  double tt = 0.0, ty = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    tt += t[i] * t[i];
    ty += t[i] * y[i];
  }
  if (!(tt > 0.0)) throw Error("slope fit needs a nonzero abscissa");
  return ty / tt;
}

double kappa(const datagen::Dataset& data) {
  require_binary(data);
  const auto& bank = *data.bank;
  const double n = static_cast<double>(data.size());
  double core = 0.0;
  for (const auto& [c, count] : data.class_counts()) {
    const double nc = static_cast<double>(count);
    const double s = bank.core_sigma.at(c);
    core += nc * nc * s * s * bank.core_feature(c).squaredNorm();
  }
  std::map<int, double> imbalance;
  for (const auto& [g, count] : data.group_counts()) imbalance[g.spurious_id] += sign_of(g.class_id) * static_cast<double>(count);
  double spur = 0.0;
  for (const auto& [s, diff] : imbalance) {
    const double sig = bank.spurious_sigma.at(s);
    spur += diff * diff * sig * sig * bank.spurious_feature(s).squaredNorm();
  }
  return (std::sqrt(core) + std::sqrt(spur)) / n;
}

std::vector<SeparabilityScore> separability_score(std::span<const double> outputs, std::span<const int> labels,
                                                  const std::vector<bool>& true_majority) {
  if (outputs.size() != labels.size() || labels.size() != true_majority.size())
    throw Error("separability: outputs, labels and tags differ in length");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<SeparabilityScore> out;
  for (const auto& [c, rows] : by_class) {
    SeparabilityScore s;
    s.class_id = c;
    if (rows.size() >= 2) {
      std::vector<double> vals;
      for (auto r : rows) vals.push_back(outputs[r]);
      const auto cl = cluster::two_means_1d(vals);
      std::size_t agree = 0;  // cluster 0 <-> majority
      std::size_t size0 = 0;
      for (std::size_t j = 0; j < rows.size(); ++j) {
        agree += (cl[j] == 0) == static_cast<bool>(true_majority[rows[j]]);
        size0 += cl[j] == 0;
      }
      const double total = static_cast<double>(rows.size());
      s.score = std::max(agree, rows.size() - agree) / total;
      // Smaller cluster is the inferred minority; cluster 1 on a tie.
      const int minority_cluster = size0 < rows.size() - size0 ? 0 : 1;
      std::size_t hits = 0, minority = 0;
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (true_majority[rows[j]]) continue;
        ++minority;
        hits += cl[j] == minority_cluster;
      }
      if (minority > 0) s.minority_recall = static_cast<double>(hits) / static_cast<double>(minority);
    }
    out.push_back(s);
  }
  return out;
}

PhaseReport phase1_check(const datagen::Dataset& data, const model::NetConfig& net_config,
                         const train::TrainConfig& train_config, const TheoryConfig& theory_config) {
  require_binary(data);
  theory_config.validate();
  const auto cfg = full_batch(train_config);
  const auto& bank = *data.bank;
  PhaseReport report;
  report.steps = theory_config.probe_steps.empty() ? early_window(data.dim(), cfg.eta) : theory_config.probe_steps;
  report.zeta = linear::activation_constants(net_config.activation, 1.0).zeta;
  report.kappa = kappa(data);
  report.noise_floor = 3.0 * report.kappa * 2.0 * cfg.eta * report.zeta * report.zeta / static_cast<double>(data.dim());
  report.input = datagen::check_input_distribution(data, net_config.m, theory_config.alpha);
  const auto predicted = predicted_slopes(data, cfg.eta, report.zeta);

  const std::set<std::size_t> probe_set(report.steps.begin(), report.steps.end());
  std::map<std::string, std::vector<double>> series;
  auto probe_all = [&](std::size_t step, const model::TwoLayerNet& net) {
    if (!probe_set.contains(step)) return;
    auto record = [&](const std::string& name, const Vector& v) {
      const double value = probe_feature(net, v);
      report.probes.push_back({step, name, value, predicted.at(name) * static_cast<double>(step)});
      series[name].push_back(value);
    };
    for (const auto& [c, v] : bank.core) record(linear::core_label(c), v);
    for (const auto& [s, v] : bank.spurious) record(linear::spurious_label(s), v);
  };

  auto net = model::init_symmetric(net_config.m, data.dim(), 1, net_config.activation, net_config.seed);
  train::FullBatch source(data.size());
  train::train(net, data.x, data.labels, source, report.steps.back(), cfg, probe_all);

  const double half = static_cast<double>(report.steps.back()) / 2.0;
  std::vector<double> t_fit;
  std::size_t fit_count = 0;
  for (auto t : report.steps) {
    if (static_cast<double>(t) > half && fit_count >= 2) break;
    t_fit.push_back(static_cast<double>(t));
    ++fit_count;
  }
  for (const auto& [name, values] : series) {
    FeatureSlope s;
    s.feature = name;
    s.predicted = predicted.at(name);
    s.fitted = fit_slope_through_origin(t_fit, std::vector<double>(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(fit_count)));
    if (s.predicted != 0.0) s.relative_error = std::abs(s.fitted - s.predicted) / std::abs(s.predicted);
    report.slopes.push_back(s);
  }
  const Matrix out = net.forward_batch(data.x);
  std::vector<double> scalar(out.data(), out.data() + out.size());
  report.separability = separability_score(scalar, data.labels, data.majority_mask());
  return report;
}

std::vector<SeparabilityScore> separability_at(const datagen::Dataset& data, const model::NetConfig& net_config,
                                               const train::TrainConfig& train_config, std::size_t steps) {
  require_binary(data);
  const auto cfg = full_batch(train_config);
  auto net = model::init_symmetric(net_config.m, data.dim(), 1, net_config.activation, net_config.seed);
  train::FullBatch source(data.size());
  train::train(net, data.x, data.labels, source, steps, cfg);
  const Matrix out = net.forward_batch(data.x);
  std::vector<double> scalar(out.data(), out.data() + out.size());
  return separability_score(scalar, data.labels, data.majority_mask());
}

DominationReport phase2_domination(const datagen::Dataset& data, const model::NetConfig& net_config,
                                   const train::TrainConfig& train_config, const TheoryConfig& theory_config) {
  require_binary(data);
  theory_config.validate();
  const auto cfg = full_batch(train_config);
  const auto& bank = *data.bank;
  DominationReport report;
  report.input = datagen::check_input_distribution(data, net_config.m, theory_config.alpha);
  report.steps = phase2_steps(data.dim(), cfg.eta, theory_config.c2);

  const auto classes = data.class_counts();
  std::size_t lo = SIZE_MAX, hi = 0, minority = 0;
  for (const auto& [c, n] : classes) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  if (lo != hi) report.warnings.push_back("classes are not balanced");
  for (const auto& g : data.group_table)
    if (!g.is_majority) minority += g.size;
  if (static_cast<double>(minority) > 0.1 * static_cast<double>(data.size()))
    report.warnings.push_back("minority groups hold more than 10% of the data");

  auto net = model::init_symmetric(net_config.m, data.dim(), 1, net_config.activation, net_config.seed);
  train::FullBatch source(data.size());
  train::train(net, data.x, data.labels, source, report.steps, cfg);

  const auto k = linear::activation_constants(net_config.activation, linear::covariance_trace_term(data.x));
  const auto beta = linear::linear_closed_form(linear::psi_matrix(data.x, k), data.labels, true);

  report.hypothesis_met = true;
  for (const auto& [c, count] : classes) {
    const datagen::GroupSpec* major = nullptr;
    for (const auto& g : data.group_table)
      if (g.class_id == c && g.is_majority && (major == nullptr || g.size > major->size)) major = &g;
    if (major == nullptr) {
      report.warnings.push_back("class " + std::to_string(c) + " has no majority group");
      report.hypothesis_met = false;
      continue;
    }
    DominationClass dc;
    dc.class_id = c;
    dc.spurious_id = major->spurious_id;
    const Vector& vc = bank.core_feature(c);
    const Vector& vs = bank.spurious_feature(major->spurious_id);
    dc.f_core = probe_feature(net, vc);
    dc.f_spurious = probe_feature(net, vs);
    dc.ratio = dc.f_core == 0.0 ? std::numeric_limits<double>::infinity() : std::abs(dc.f_spurious) / std::abs(dc.f_core);
    dc.r_core = datagen::nsr(vc.norm(), bank.core_sigma.at(c));
    dc.r_spurious = datagen::nsr(vs.norm(), bank.spurious_sigma.at(major->spurious_id));
    dc.bound = dc.r_core > 0.0 ? std::sqrt(2.0) * dc.r_spurious / dc.r_core : std::numeric_limits<double>::infinity();
    const double bc = std::abs(beta.beta_data.dot(vc)) * vc.norm();
    const double bs = std::abs(beta.beta_data.dot(vs)) * vs.norm();
    dc.closed_form_ratio = bc == 0.0 ? std::numeric_limits<double>::infinity() : bs / bc;
    if (!(std::min(dc.r_core, 1.0) > 5.0 * dc.r_spurious)) report.hypothesis_met = false;
    report.classes.push_back(dc);
  }
  return report;
}

AssumptionReport assumption_check(const datagen::Dataset& data, const model::NetConfig& net_config,
                                  const train::TrainConfig& train_config, std::size_t steps) {
  require_binary(data);
  const auto cfg = full_batch(train_config);
  AssumptionReport report;
  report.constants = linear::activation_constants(net_config.activation, linear::covariance_trace_term(data.x));
  const Matrix psi_rows = linear::psi_matrix(data.x, report.constants);
  auto lin = linear::LinearModel::zeros(data.dim());
  auto net = model::init_symmetric(net_config.m, data.dim(), 1, net_config.activation, net_config.seed);
  const auto& bank = *data.bank;

  auto record = [&](std::size_t step) {
    const Matrix f = net.forward_batch(data.x);
    const Vector fl = linear::linear_forward_batch(lin, psi_rows);
    report.steps.push_back(step);
    report.train_gap.push_back((f.col(0) - fl).squaredNorm() / static_cast<double>(data.size()));
    const auto gaps = linear::feature_gap(net, lin, bank, data.group_table, report.constants);
    double core = 0.0, spur = 0.0;
    for (const auto& [name, g] : gaps) {
      double& slot = name.starts_with("core:") ? core : spur;
      slot = std::max(slot, g);
    }
    report.core_gap.push_back(core);
    report.spurious_gap.push_back(spur);
  };
  record(0);
  for (std::size_t t = 1; t <= steps; ++t) {
    auto g = model::loss_gradient(net, model::Loss::l2, data.x, data.labels);
    model::apply_gradient(net, g, cfg.eta, cfg.eta);
    lin = linear::linear_gd_step(lin, psi_rows, data.labels, cfg.eta);
    record(t);
  }
  return report;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

void write_phase1_csv(const PhaseReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "step,feature_id,probe_value,predicted_value\n";
  for (const auto& p : report.probes) out << p.step << ',' << p.feature << ',' << p.value << ',' << p.predicted << '\n';
}

void write_separability_csv(const std::vector<SeparabilityScore>& scores, std::size_t step, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "class,step,separability,minority_recall\n";
  for (const auto& s : scores) {
    out << s.class_id << ',' << step << ',';
    if (s.score) out << *s.score;
    out << ',';
    if (s.minority_recall) out << *s.minority_recall;
    out << '\n';
  }
}

void write_domination_csv(const DominationReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "class,spurious_id,step,f_core,f_spurious,ratio,r_core,r_spurious,bound,closed_form_ratio\n";
  for (const auto& c : report.classes)
    out << c.class_id << ',' << c.spurious_id << ',' << report.steps << ',' << c.f_core << ',' << c.f_spurious << ','
        << c.ratio << ',' << c.r_core << ',' << c.r_spurious << ',' << c.bound << ',' << c.closed_form_ratio << '\n';
}

void write_assumption_csv(const AssumptionReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "step,train_gap,core_gap,spurious_gap\n";
  for (std::size_t k = 0; k < report.steps.size(); ++k)
    out << report.steps[k] << ',' << report.train_gap[k] << ',' << report.core_gap[k] << ',' << report.spurious_gap[k] << '\n';
}

}  // namespace spare::theory
