#include "spare/datagen.hpp"

#include "spare/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace spare::datagen {

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

const Vector& FeatureBank::core_feature(int class_id) const {
  auto it = core.find(class_id);
  if (it == core.end()) throw Error("no core feature for class " + std::to_string(class_id));
  return it->second;
}

const Vector& FeatureBank::spurious_feature(int spurious_id) const {
  auto it = spurious.find(spurious_id);
  if (it == spurious.end()) throw Error("no spurious feature with id " + std::to_string(spurious_id));
  return it->second;
}

namespace {

std::vector<const Vector*> all_vectors(const FeatureBank& bank) {
  std::vector<const Vector*> out;
  for (const auto& [id, v] : bank.core) out.push_back(&v);
  for (const auto& [id, v] : bank.spurious) out.push_back(&v);
  return out;
}

}  // namespace

double FeatureBank::max_abs_cosine() const {
  const auto vs = all_vectors(*this);
  double worst = 0.0;
  for (std::size_t a = 0; a < vs.size(); ++a)
    for (std::size_t b = a + 1; b < vs.size(); ++b)
      worst = std::max(worst, std::abs(vs[a]->dot(*vs[b])) / (vs[a]->norm() * vs[b]->norm()));
  return worst;
}

Matrix FeatureBank::feature_basis() const {
  const auto vs = all_vectors(*this);
  Matrix basis(dim, vs.size());
  for (std::size_t k = 0; k < vs.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = vs[k]->normalized();
  return basis;
}

FeatureBank build_feature_bank(std::size_t d, const std::map<int, double>& core_magnitudes,
                               const std::map<int, double>& spurious_magnitudes,
                               const NoiseLevels& sigmas, const BankOptions& options) {
  const std::size_t needed = core_magnitudes.size() + spurious_magnitudes.size();
  if (d < needed) {
    throw ConfigError("feature bank needs d >= " + std::to_string(needed) + " (got d = " +
                      std::to_string(d) + ")");
  }
  if (sigmas.ambient < 0.0) throw ConfigError("ambient noise sigma must be nonnegative");

  FeatureBank bank;
  bank.dim = d;
  bank.ambient_sigma = sigmas.ambient;
  bank.rotated = options.random_rotation;

  auto place = [&](const std::map<int, double>& mags, const std::map<int, double>& sig,
                   std::map<int, Vector>& vecs, std::map<int, double>& out_sig,
                   std::size_t& coord, const char* what) {
    for (const auto& [id, mag] : mags) {
      if (!(mag > 0.0)) {
        throw ConfigError(std::string(what) + " feature " + std::to_string(id) +
                          " needs a positive magnitude");
      }
      Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
      v[static_cast<Eigen::Index>(coord++)] = mag;
      vecs.emplace(id, std::move(v));
      auto s = sig.find(id);
      const double sigma = s == sig.end() ? 0.0 : s->second;
      if (sigma < 0.0) throw ConfigError(std::string(what) + " sigma must be nonnegative");
      out_sig.emplace(id, sigma);
    }
  };
  std::size_t coord = 0;
  place(core_magnitudes, sigmas.core, bank.core, bank.core_sigma, coord, "core");
  place(spurious_magnitudes, sigmas.spurious, bank.spurious, bank.spurious_sigma, coord, "spurious");

  if (options.random_rotation) {
    Rng rng = make_rng(options.rotation_seed, Stream::bank_rotation);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    // Sign fix so that Q is Haar distributed.
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j)
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    for (auto& [id, v] : bank.core) v = q * v;
    for (auto& [id, v] : bank.spurious) v = q * v;
  }
  return bank;
}

void validate_groups(std::span<const GroupSpec> groups) {
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // min majority, max minority
  std::set<GroupKey> seen;
  for (const auto& g : groups) {
    if (g.size == 0) {
      throw ConfigError("group (" + std::to_string(g.class_id) + "," + std::to_string(g.spurious_id) +
                        ") has size 0");
    }
    if (!seen.insert(g.key()).second) {
      throw ConfigError("group (" + std::to_string(g.class_id) + "," + std::to_string(g.spurious_id) +
                        ") listed twice");
    }
    auto& [min_major, max_minor] = per_class.try_emplace(g.class_id, SIZE_MAX, 0).first->second;
    if (g.is_majority)
      min_major = std::min(min_major, g.size);
    else
      max_minor = std::max(max_minor, g.size);
  }
  for (const auto& [c, mm] : per_class) {
    if (mm.first != SIZE_MAX && mm.second > mm.first) {
      throw ConfigError("class " + std::to_string(c) +
                        ": a minority group is larger than a majority group");
    }
  }
}

Example Dataset::example(std::size_t i) const {
  return Example{ids.at(i), x.row(static_cast<Eigen::Index>(i)).transpose(), labels.at(i), groups.at(i),
                 split};
}

std::map<int, std::size_t> Dataset::class_counts() const {
  std::map<int, std::size_t> out;
  for (int y : labels) ++out[y];
  return out;
}

std::map<GroupKey, std::size_t> Dataset::group_counts() const {
  std::map<GroupKey, std::size_t> out;
  for (const auto& g : groups) ++out[g];
  return out;
}

std::vector<int> Dataset::classes() const {
  std::vector<int> out;
  for (const auto& [c, n] : class_counts()) out.push_back(c);
  return out;
}

int Dataset::group_index(const GroupKey& key) const {
  for (std::size_t k = 0; k < group_table.size(); ++k)
    if (group_table[k].key() == key) return static_cast<int>(k);
  return -1;
}

std::vector<int> Dataset::group_indices() const {
  std::map<GroupKey, int> lookup;
  for (std::size_t k = 0; k < group_table.size(); ++k) lookup.emplace(group_table[k].key(), static_cast<int>(k));
  std::vector<int> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    auto it = lookup.find(g);
    if (it == lookup.end()) {
      throw Error("example group (" + std::to_string(g.class_id) + "," + std::to_string(g.spurious_id) +
                  ") missing from the group table");
    }
    out.push_back(it->second);
  }
  return out;
}

std::vector<bool> Dataset::majority_mask() const {
  const auto idx = group_indices();
  std::vector<bool> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = group_table[static_cast<std::size_t>(idx[i])].is_majority;
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.split = split;
  out.bank = bank;
  out.seed = seed;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.x.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
    out.labels.push_back(labels[rows[k]]);
    out.groups.push_back(groups[rows[k]]);
    out.ids.push_back(ids[rows[k]]);
  }
  const auto counts = out.group_counts();
  for (GroupSpec g : group_table) {
    auto it = counts.find(g.key());
    if (it == counts.end()) continue;
    g.size = it->second;
    out.group_table.push_back(g);
  }
  return out;
}

Dataset generate_synthetic(const FeatureBank& bank, std::span<const GroupSpec> groups, std::uint64_t seed,
                           Split split) {
  validate_groups(groups);
  std::size_t n = 0;
  for (const auto& g : groups) {
    bank.core_feature(g.class_id);
    bank.spurious_feature(g.spurious_id);
    n += g.size;
  }
  const auto d = static_cast<Eigen::Index>(bank.dim);

  Dataset data;
  data.split = split;
  data.bank = bank;
  data.seed = seed;
  data.group_table.assign(groups.begin(), groups.end());
  data.x.resize(static_cast<Eigen::Index>(n), d);
  data.labels.reserve(n);
  data.groups.reserve(n);
  data.ids.reserve(n);

  Matrix basis;
  if (bank.ambient_sigma > 0.0) basis = bank.feature_basis();

  Rng rng = make_rng(seed, Stream::synthetic_noise, static_cast<std::uint64_t>(split));
  std::normal_distribution<double> normal;
  Vector ambient(d);
  Eigen::Index row = 0;
  for (const auto& g : groups) {
    const Vector& vc = bank.core.at(g.class_id);
    const Vector& vs = bank.spurious.at(g.spurious_id);
    const double sc = bank.core_sigma.at(g.class_id);
    const double ss = bank.spurious_sigma.at(g.spurious_id);
    const Vector uc = vc / vc.norm();
    const Vector us = vs / vs.norm();
    for (std::size_t k = 0; k < g.size; ++k, ++row) {
      const double gc = normal(rng);
      const double gs = normal(rng);
      auto xr = data.x.row(row);
      xr = (vc + vs + sc * gc * uc + ss * gs * us).transpose();
      if (bank.ambient_sigma > 0.0) {
        for (Eigen::Index j = 0; j < d; ++j) ambient[j] = normal(rng);
        ambient -= basis * (basis.transpose() * ambient);
        xr += bank.ambient_sigma * ambient.transpose();
      }
      data.labels.push_back(g.class_id);
      data.groups.push_back(g.key());
      data.ids.push_back(row);
    }
  }
  return data;
}

double nsr(double magnitude, double sigma) {
  if (!(magnitude > 0.0)) throw Error("noise-to-signal ratio needs a positive magnitude");
  return sigma / magnitude;
}

std::string InputDistributionReport::summary() const {
  std::ostringstream os;
  os << "|x|^2/d mean=" << mean_sq_norm_ratio << " range=[" << min_sq_norm_ratio << ", "
     << max_sq_norm_ratio << "] max|<xi,xj>|/d=" << max_abs_inner_ratio << " tol=" << tolerance
     << (norms_ok ? "" : " [norms outside 1 +- 3 tol]") << (n_feasible ? "" : " [n < d^(1+alpha)]")
     << (m_feasible ? "" : " [m < d^(1+alpha)]");
  return os.str();
}

InputDistributionReport check_input_distribution(const Dataset& data, std::size_t width, double alpha) {
  InputDistributionReport r;
  const auto n = data.size();
  const double d = static_cast<double>(data.dim());
  if (n == 0) return r;
  const Vector sq = data.x.rowwise().squaredNorm() / d;
  r.mean_sq_norm_ratio = sq.mean();
  r.min_sq_norm_ratio = sq.minCoeff();
  r.max_sq_norm_ratio = sq.maxCoeff();
  const auto probe = static_cast<Eigen::Index>(std::min<std::size_t>(n, 200));
  const Matrix top = data.x.topRows(probe);
  const Matrix gram = top * top.transpose() / d;
  for (Eigen::Index i = 0; i < probe; ++i)
    for (Eigen::Index j = i + 1; j < probe; ++j) r.max_abs_inner_ratio = std::max(r.max_abs_inner_ratio, std::abs(gram(i, j)));
  r.tolerance = std::sqrt(std::log(static_cast<double>(std::max<std::size_t>(n, 2))) / d);
  r.norms_ok = std::abs(r.min_sq_norm_ratio - 1.0) <= 3 * r.tolerance &&
               std::abs(r.max_sq_norm_ratio - 1.0) <= 3 * r.tolerance;
  const double need = std::pow(d, 1.0 + alpha);
  r.n_feasible = static_cast<double>(n) >= need;
  r.m_feasible = static_cast<double>(width) >= need;
  return r;
}

}  // namespace spare::datagen
