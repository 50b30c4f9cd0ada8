#include "spare/dataset_io.hpp"

#include "binary.hpp"

#include <json.hpp>

#include <fstream>

namespace spare::io {

using nlohmann::json;

namespace {

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

json bank_to_json(const datagen::FeatureBank& bank) {
  json j;
  j["dim"] = bank.dim;
  j["ambient_sigma"] = bank.ambient_sigma;
  j["rotated"] = bank.rotated;
  auto features = [](const std::map<int, Vector>& vecs, const std::map<int, double>& sig) {
    json arr = json::array();
    for (const auto& [id, v] : vecs) {
      arr.push_back({{"id", id},
                     {"magnitude", v.norm()},
                     {"sigma", sig.at(id)},
                     {"vector", std::vector<double>(v.data(), v.data() + v.size())}});
    }
    return arr;
  };
  j["core"] = features(bank.core, bank.core_sigma);
  j["spurious"] = features(bank.spurious, bank.spurious_sigma);
  return j;
}

datagen::FeatureBank bank_from_json(const json& j) {
  datagen::FeatureBank bank;
  bank.dim = j.at("dim").get<std::size_t>();
  bank.ambient_sigma = j.at("ambient_sigma").get<double>();
  bank.rotated = j.at("rotated").get<bool>();
  auto features = [&](const json& arr, std::map<int, Vector>& vecs, std::map<int, double>& sig) {
    for (const auto& f : arr) {
      const int id = f.at("id").get<int>();
      const auto v = f.at("vector").get<std::vector<double>>();
      if (v.size() != bank.dim) throw Error("dataset metadata: feature vector has wrong length");
      vecs.emplace(id, Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
      sig.emplace(id, f.at("sigma").get<double>());
    }
  };
  features(j.at("core"), bank.core, bank.core_sigma);
  features(j.at("spurious"), bank.spurious, bank.spurious_sigma);
  return bank;
}

}  // namespace

void save_dataset(const datagen::Dataset& data, const std::filesystem::path& stem) {
  const auto group_index = data.group_indices();
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  {
    detail::BinaryWriter w(with_ext(stem, ".spds"));
    w.raw(kDatasetMagic, 4);
    w.u32(kDatasetVersion);
    w.u64(data.size());
    w.u64(data.dim());
    w.f64_block(data.x.data(), static_cast<std::size_t>(data.x.size()));
    for (int y : data.labels) w.u32(static_cast<std::uint32_t>(static_cast<std::int32_t>(y)));
    for (int g : group_index) w.u32(static_cast<std::uint32_t>(g));
    w.close();
  }
  json meta;
  meta["format"] = "spds";
  meta["version"] = kDatasetVersion;
  meta["split"] = datagen::to_string(data.split);
  meta["seed"] = data.seed;
  meta["n"] = data.size();
  meta["d"] = data.dim();
  meta["ids"] = data.ids;
  json groups = json::array();
  for (std::size_t k = 0; k < data.group_table.size(); ++k) {
    const auto& g = data.group_table[k];
    groups.push_back({{"index", k},
                      {"class", g.class_id},
                      {"spurious", g.spurious_id},
                      {"size", g.size},
                      {"majority", g.is_majority}});
  }
  meta["groups"] = groups;
  if (data.bank) meta["bank"] = bank_to_json(*data.bank);
  std::ofstream out(with_ext(stem, ".json"));
  out << meta.dump(2) << '\n';
  if (!out) throw Error("cannot write " + with_ext(stem, ".json").string());
}

datagen::Dataset load_dataset(const std::filesystem::path& stem) {
  const auto meta_path = with_ext(stem, ".json");
  std::ifstream in(meta_path);
  if (!in) throw Error("cannot open " + meta_path.string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("malformed dataset metadata " + meta_path.string() + ": " + e.what());
  }

  datagen::Dataset data;
  detail::BinaryReader r(with_ext(stem, ".spds"));
  char magic[4];
  r.raw(magic, 4);
  if (!std::equal(magic, magic + 4, kDatasetMagic)) throw Error("not an SPDS file: " + stem.string());
  const auto version = r.u32();
  if (version != kDatasetVersion) throw Error("unsupported SPDS version " + std::to_string(version));
  const auto n = r.u64();
  const auto d = r.u64();
  data.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  r.f64_block(data.x.data(), n * d);
  data.labels.resize(n);
  for (auto& y : data.labels) y = static_cast<std::int32_t>(r.u32());
  std::vector<std::uint32_t> gid(n);
  for (auto& g : gid) g = r.u32();
  r.expect_end();

  try {
    data.split = datagen::parse_split(meta.at("split").get<std::string>());
    data.seed = meta.at("seed").get<std::uint64_t>();
    data.ids = meta.at("ids").get<std::vector<std::int64_t>>();
    for (const auto& g : meta.at("groups")) {
      data.group_table.push_back({g.at("class").get<int>(), g.at("spurious").get<int>(),
                                  g.at("size").get<std::size_t>(), g.at("majority").get<bool>()});
    }
    if (meta.contains("bank")) data.bank = bank_from_json(meta.at("bank"));
  } catch (const json::exception& e) {
    throw Error("malformed dataset metadata " + meta_path.string() + ": " + e.what());
  }
  if (data.ids.size() != n) throw Error("dataset metadata lists " + std::to_string(data.ids.size()) + " ids for " + std::to_string(n) + " examples");
  data.groups.reserve(n);
  for (auto g : gid) {
    if (g >= data.group_table.size()) throw Error("group id " + std::to_string(g) + " outside the group table");
    data.groups.push_back(data.group_table[g].key());
  }
  return data;
}

}  // namespace spare::io
