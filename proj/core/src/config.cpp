#include "spare/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace spare::config {

namespace pt = boost::property_tree;

std::string to_string(Source s) { return s == Source::synthetic ? "synthetic" : "cmnist"; }

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"run", {"strategy", "seed", "save_data", "eval_every_epoch"}},
      {"dataset", {"source"}},
      {"synthetic", {"d", "ambient_sigma", "random_rotation", "rotation_seed", "core", "spurious", "groups", "test_group_size"}},
      {"cmnist", {"mnist_dir", "p_corr", "palette", "train_size", "train_subset", "val_subset", "test_subset", "build_val"}},
      {"model", {"m", "activation", "o"}},
      {"train", {"eta", "epochs", "steps", "batch_size", "loss", "weight_decay", "lr_convention"}},
      {"spare", {"t_init_epochs", "layer", "k_min", "k_max", "lambda", "normalization", "stage2_init"}},
      {"jtt", {"factor", "flags"}},
      {"gdro", {"eta_q", "groups"}},
      {"theory", {"checks", "alpha", "c2", "probe_steps", "separability_step", "coupling_steps", "slope_tolerance",
                  "separability_min", "domination_min", "bound_slack", "gap_max"}},
  };
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  const std::string* raw(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return nullptr;
    const auto it = sec->find(key);
    if (it == sec->not_found()) return nullptr;
    return &it->second.data();
  }

  template <class T, class F>
  void get(const std::string& section, const std::string& key, T& out, F convert) const {
    const std::string* text = raw(section, key);
    if (text == nullptr) return;
    const std::string value = boost::trim_copy(*text);
    try {
      out = convert(value);
    } catch (const ConfigError& e) {
      throw ConfigError(section + "." + key + ": " + e.what());
    } catch (const std::exception&) {
      throw ConfigError(section + "." + key + ": cannot parse '" + value + "'");
    }
  }

 private:
  const pt::ptree& tree_;
};

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("expected a nonnegative integer, got '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) { return static_cast<std::uint64_t>(to_size(s)); }

int to_int(const std::string& s) {
  int v = 0;
  const char* begin = s.data();
  if (!s.empty() && s[0] == '+') ++begin;
  const auto [p, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || begin == s.data() + s.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  if (boost::trim_copy(s).empty()) return parts;
  boost::split(parts, s, boost::is_any_of(","));
  for (auto& p : parts) boost::trim(p);
  return parts;
}

std::vector<std::string> split_fields(const std::string& s) {
  std::vector<std::string> parts;
  boost::split(parts, s, boost::is_any_of(":"));
  for (auto& p : parts) boost::trim(p);
  return parts;
}

std::vector<FeatureSpec> to_features(const std::string& s) {
  std::vector<FeatureSpec> out;
  for (const auto& item : split_list(s)) {
    const auto f = split_fields(item);
    if (f.size() != 3) throw ConfigError("feature entries are id:magnitude:sigma, got '" + item + "'");
    out.push_back({to_int(f[0]), to_double(f[1]), to_double(f[2])});
  }
  return out;
}

std::vector<datagen::GroupSpec> to_groups(const std::string& s) {
  std::vector<datagen::GroupSpec> out;
  for (const auto& item : split_list(s)) {
    const auto f = split_fields(item);
    if (f.size() != 3 && !(f.size() == 4 && f[3] == "maj"))
      throw ConfigError("group entries are class:spurious:size[:maj], got '" + item + "'");
    out.push_back({to_int(f[0]), to_int(f[1]), to_size(f[2]), f.size() == 4});
  }
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_size(item));
  return out;
}

template <class E>
E pick(const std::string& s, std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (s == name) return value;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError("expected one of " + names + ", got '" + s + "'");
}

std::string join_features(const std::vector<FeatureSpec>& fs) {
  std::string out;
  for (const auto& f : fs) out += (out.empty() ? "" : ", ") + std::to_string(f.id) + ":" + fmt(f.magnitude) + ":" + fmt(f.sigma);
  return out;
}

std::string join_groups(const std::vector<datagen::GroupSpec>& gs) {
  std::string out;
  for (const auto& g : gs)
    out += (out.empty() ? "" : ", ") + std::to_string(g.class_id) + ":" + std::to_string(g.spurious_id) + ":" +
           std::to_string(g.size) + (g.is_majority ? ":maj" : "");
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (const auto& x : xs) {
    std::ostringstream os;
    os << x;
    out += (out.empty() ? "" : ", ") + os.str();
  }
  return out;
}

const char* name_of(Stage2Init v) { return v == Stage2Init::fresh ? "fresh" : "resume"; }
const char* name_of(JttFlags v) { return v == JttFlags::misclassified ? "misclassified" : "clusters"; }
const char* name_of(GdroGroups v) { return v == GdroGroups::true_groups ? "true" : "inferred"; }
const char* name_of(bool b) { return b ? "true" : "false"; }

}  // namespace

RunConfig parse(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      if (body.empty()) throw ConfigError("config key '" + section + "' must live inside a section");
      throw ConfigError("unknown config section [" + section + "]");
    }
    for (const auto& [key, value] : body)
      if (!it->second.contains(key)) throw ConfigError("unknown config key " + section + "." + key);
  }

  Reader r(tree);
  RunConfig c;
  r.get("run", "strategy", c.strategy, sampling::parse_strategy);
  r.get("run", "seed", c.seed, to_u64);
  r.get("run", "save_data", c.save_data, to_bool);
  r.get("run", "eval_every_epoch", c.eval_every_epoch, to_bool);
  r.get("dataset", "source", c.source, [](const std::string& s) {
    return pick<Source>(s, {{"synthetic", Source::synthetic}, {"cmnist", Source::cmnist}});
  });

  auto& s = c.synthetic;
  r.get("synthetic", "d", s.d, to_size);
  r.get("synthetic", "ambient_sigma", s.ambient_sigma, to_double);
  r.get("synthetic", "random_rotation", s.random_rotation, to_bool);
  r.get("synthetic", "rotation_seed", s.rotation_seed, to_u64);
  r.get("synthetic", "core", s.core, to_features);
  r.get("synthetic", "spurious", s.spurious, to_features);
  r.get("synthetic", "groups", s.groups, to_groups);
  r.get("synthetic", "test_group_size", s.test_group_size, to_size);

  auto& cm = c.cmnist;
  r.get("cmnist", "mnist_dir", cm.mnist_dir, [](const std::string& v) { return v; });
  r.get("cmnist", "p_corr", cm.p_corr, to_double);
  r.get("cmnist", "palette", cm.palette, split_list);
  r.get("cmnist", "train_size", cm.train_size, to_size);
  r.get("cmnist", "train_subset", cm.train_subset, to_size);
  r.get("cmnist", "val_subset", cm.val_subset, to_size);
  r.get("cmnist", "test_subset", cm.test_subset, to_size);
  r.get("cmnist", "build_val", cm.build_val, to_bool);

  r.get("model", "m", c.m, to_size);
  r.get("model", "activation", c.activation, [](const std::string& v) { return model::Activation::parse(v); });
  r.get("model", "o", c.o, to_size);

  auto& t = c.train;
  r.get("train", "eta", t.eta, to_double);
  r.get("train", "epochs", t.epochs, to_size);
  r.get("train", "steps", t.steps, to_size);
  r.get("train", "batch_size", t.batch_size, [](const std::string& v) { return v == "full" ? std::size_t{0} : to_size(v); });
  r.get("train", "loss", t.loss, model::parse_loss);
  r.get("train", "weight_decay", t.weight_decay, to_double);
  r.get("train", "lr_convention", t.lr_convention, train::parse_lr_convention);

  auto& sp = c.spare;
  r.get("spare", "t_init_epochs", sp.t_init_epochs, to_size);
  r.get("spare", "layer", sp.layer, model::parse_layer_tag);
  r.get("spare", "k_min", sp.k_min, to_size);
  r.get("spare", "k_max", sp.k_max, to_size);
  r.get("spare", "lambda", sp.lambda, to_int);
  r.get("spare", "normalization", sp.normalization, sampling::parse_normalization);
  r.get("spare", "stage2_init", sp.stage2_init, [](const std::string& v) {
    return pick<Stage2Init>(v, {{"fresh", Stage2Init::fresh}, {"resume", Stage2Init::resume}});
  });

  r.get("jtt", "factor", c.jtt.factor, to_size);
  r.get("jtt", "flags", c.jtt.flags, [](const std::string& v) {
    return pick<JttFlags>(v, {{"misclassified", JttFlags::misclassified}, {"clusters", JttFlags::clusters}});
  });
  r.get("gdro", "eta_q", c.gdro.eta_q, to_double);
  r.get("gdro", "groups", c.gdro.groups, [](const std::string& v) {
    return pick<GdroGroups>(v, {{"true", GdroGroups::true_groups}, {"inferred", GdroGroups::inferred}});
  });

  auto& th = c.theory;
  r.get("theory", "checks", th, [&th](const std::string& v) {
    TheoryChecks out = th;
    out.phase1 = out.separability = out.phase2 = out.assumption = false;
    for (const auto& name : split_list(v)) {
      if (name == "phase1") out.phase1 = true;
      else if (name == "separability") out.separability = true;
      else if (name == "phase2") out.phase2 = true;
      else if (name == "assumption") out.assumption = true;
      else throw ConfigError("unknown check '" + name + "' (expected phase1, separability, phase2, assumption)");
    }
    return out;
  });
  r.get("theory", "alpha", th.alpha, to_double);
  r.get("theory", "c2", th.c2, to_double);
  r.get("theory", "probe_steps", th.probe_steps, to_sizes);
  r.get("theory", "separability_step", th.separability_step, to_size);
  r.get("theory", "coupling_steps", th.coupling_steps, to_size);
  r.get("theory", "slope_tolerance", th.slope_tolerance, to_double);
  r.get("theory", "separability_min", th.separability_min, to_double);
  r.get("theory", "domination_min", th.domination_min, to_double);
  r.get("theory", "bound_slack", th.bound_slack, to_double);
  r.get("theory", "gap_max", th.gap_max, to_double);

  c.train.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void RunConfig::validate() const {
  if (m == 0 || m % 2 != 0) throw ConfigError("model.m must be a positive even number (got " + std::to_string(m) + ")");
  train.validate();
  if (train.steps == 0 && train.epochs == 0) throw ConfigError("train.epochs or train.steps must be positive");
  if (source == Source::synthetic) {
    const auto& s = synthetic;
    if (s.d == 0) throw ConfigError("synthetic.d must be positive");
    if (s.core.empty()) throw ConfigError("synthetic.core must list at least one class feature");
    if (s.groups.empty()) throw ConfigError("synthetic.groups must list at least one group");
    if (s.ambient_sigma < 0.0) throw ConfigError("synthetic.ambient_sigma must be nonnegative");
    std::set<int> core_ids, spur_ids;
    for (const auto& f : s.core) {
      if (!(f.magnitude > 0.0) || f.sigma < 0.0) throw ConfigError("synthetic.core: magnitudes must be positive and sigmas nonnegative");
      if (!core_ids.insert(f.id).second) throw ConfigError("synthetic.core lists class " + std::to_string(f.id) + " twice");
    }
    for (const auto& f : s.spurious) {
      if (!(f.magnitude > 0.0) || f.sigma < 0.0) throw ConfigError("synthetic.spurious: magnitudes must be positive and sigmas nonnegative");
      if (!spur_ids.insert(f.id).second) throw ConfigError("synthetic.spurious lists id " + std::to_string(f.id) + " twice");
    }
    for (const auto& g : s.groups) {
      if (!core_ids.contains(g.class_id)) throw ConfigError("synthetic.groups: class " + std::to_string(g.class_id) + " has no core feature");
      if (!spur_ids.contains(g.spurious_id)) throw ConfigError("synthetic.groups: spurious id " + std::to_string(g.spurious_id) + " is not declared");
    }
    if (s.d < core_ids.size() + spur_ids.size())
      throw ConfigError("synthetic.d must be at least " + std::to_string(core_ids.size() + spur_ids.size()));
    try {
      datagen::validate_groups(s.groups);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("synthetic.groups: ") + e.what());
    }
    if (train.loss == model::Loss::l2 && core_ids != std::set<int>{-1, 1})
      throw ConfigError("train.loss = l2 needs synthetic classes -1 and 1");
    if (train.loss == model::Loss::cross_entropy && (*core_ids.begin() < 0))
      throw ConfigError("train.loss = cross_entropy needs class ids 0, 1, ...");
  } else {
    if (!(cmnist.p_corr > 0.0 && cmnist.p_corr <= 1.0)) throw ConfigError("cmnist.p_corr must lie in (0, 1]");
    if (cmnist.palette.size() != static_cast<std::size_t>(cmnist::kClasses))
      throw ConfigError("cmnist.palette must list exactly 5 colors");
    for (const auto& c : cmnist.palette) {
      try {
        cmnist::parse_rgb(c);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("cmnist.palette: ") + e.what());
      }
    }
    if (train.loss != model::Loss::cross_entropy) throw ConfigError("train.loss must be cross_entropy for cmnist");
  }
  if (spare.k_min == 0 || spare.k_max < spare.k_min) throw ConfigError("spare.k_min/k_max must satisfy 1 <= k_min <= k_max");
  if (spare.lambda < 0) throw ConfigError("spare.lambda must be nonnegative (0 selects the silhouette rule)");
  const bool needs_stage1 = strategy == sampling::Strategy::spare || strategy == sampling::Strategy::jtt ||
                            (strategy == sampling::Strategy::gdro && gdro.groups == GdroGroups::inferred);
  if (needs_stage1 && spare.t_init_epochs == 0) throw ConfigError("spare.t_init_epochs must be positive for strategy " + sampling::to_string(strategy));
  if (jtt.factor == 0) throw ConfigError("jtt.factor must be at least 1");
  if (gdro.eta_q < 0.0) throw ConfigError("gdro.eta_q must be nonnegative");
  if (!(theory.alpha > 0.0 && theory.alpha < 0.25)) throw ConfigError("theory.alpha must lie in (0, 0.25)");
  if (!(theory.c2 > 0.0)) throw ConfigError("theory.c2 must be positive");
}

std::string serialize(const RunConfig& c) {
  std::ostringstream os;
  os << "[run]\n"
     << "strategy = " << sampling::to_string(c.strategy) << "\n"
     << "seed = " << c.seed << "\n"
     << "save_data = " << name_of(c.save_data) << "\n"
     << "eval_every_epoch = " << name_of(c.eval_every_epoch) << "\n\n"
     << "[dataset]\nsource = " << to_string(c.source) << "\n\n";
  const auto& s = c.synthetic;
  os << "[synthetic]\n"
     << "d = " << s.d << "\n"
     << "ambient_sigma = " << fmt(s.ambient_sigma) << "\n"
     << "random_rotation = " << name_of(s.random_rotation) << "\n"
     << "rotation_seed = " << s.rotation_seed << "\n"
     << "core = " << join_features(s.core) << "\n"
     << "spurious = " << join_features(s.spurious) << "\n"
     << "groups = " << join_groups(s.groups) << "\n"
     << "test_group_size = " << s.test_group_size << "\n\n";
  const auto& cm = c.cmnist;
  os << "[cmnist]\n"
     << "mnist_dir = " << cm.mnist_dir << "\n"
     << "p_corr = " << fmt(cm.p_corr) << "\n"
     << "palette = " << join(cm.palette) << "\n"
     << "train_size = " << cm.train_size << "\n"
     << "train_subset = " << cm.train_subset << "\n"
     << "val_subset = " << cm.val_subset << "\n"
     << "test_subset = " << cm.test_subset << "\n"
     << "build_val = " << name_of(cm.build_val) << "\n\n";
  os << "[model]\n"
     << "m = " << c.m << "\n"
     << "activation = " << c.activation.name() << "\n"
     << "o = " << c.o << "\n\n";
  const auto& t = c.train;
  os << "[train]\n"
     << "eta = " << fmt(t.eta) << "\n"
     << "epochs = " << t.epochs << "\n"
     << "steps = " << t.steps << "\n"
     << "batch_size = " << (t.batch_size == 0 ? std::string("full") : std::to_string(t.batch_size)) << "\n"
     << "loss = " << model::to_string(t.loss) << "\n"
     << "weight_decay = " << fmt(t.weight_decay) << "\n"
     << "lr_convention = " << train::to_string(t.lr_convention) << "\n\n";
  const auto& sp = c.spare;
  os << "[spare]\n"
     << "t_init_epochs = " << sp.t_init_epochs << "\n"
     << "layer = " << model::to_string(sp.layer) << "\n"
     << "k_min = " << sp.k_min << "\n"
     << "k_max = " << sp.k_max << "\n"
     << "lambda = " << sp.lambda << "\n"
     << "normalization = " << sampling::to_string(sp.normalization) << "\n"
     << "stage2_init = " << name_of(sp.stage2_init) << "\n\n";
  os << "[jtt]\nfactor = " << c.jtt.factor << "\nflags = " << name_of(c.jtt.flags) << "\n\n";
  os << "[gdro]\neta_q = " << fmt(c.gdro.eta_q) << "\ngroups = " << name_of(c.gdro.groups) << "\n\n";
  const auto& th = c.theory;
  std::vector<std::string> checks;
  if (th.phase1) checks.emplace_back("phase1");
  if (th.separability) checks.emplace_back("separability");
  if (th.phase2) checks.emplace_back("phase2");
  if (th.assumption) checks.emplace_back("assumption");
  os << "[theory]\n"
     << "checks = " << join(checks) << "\n"
     << "alpha = " << fmt(th.alpha) << "\n"
     << "c2 = " << fmt(th.c2) << "\n"
     << "probe_steps = " << join(th.probe_steps) << "\n"
     << "separability_step = " << th.separability_step << "\n"
     << "coupling_steps = " << th.coupling_steps << "\n"
     << "slope_tolerance = " << fmt(th.slope_tolerance) << "\n"
     << "separability_min = " << fmt(th.separability_min) << "\n"
     << "domination_min = " << fmt(th.domination_min) << "\n"
     << "bound_slack = " << fmt(th.bound_slack) << "\n"
     << "gap_max = " << fmt(th.gap_max) << "\n";
  return os.str();
}

}  // namespace spare::config
