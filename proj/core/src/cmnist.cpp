#include "spare/cmnist.hpp"

#include "spare/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

namespace spare::cmnist {

Rgb parse_rgb(const std::string& hex) {
  std::string h = hex;
  if (!h.empty() && h.front() == '#') h.erase(0, 1);
  if (h.size() != 6 || !std::all_of(h.begin(), h.end(), [](unsigned char ch) { return std::isxdigit(ch); }))
    throw ConfigError("invalid color '" + hex + "' (expected #rrggbb)");
  const auto v = std::stoul(h, nullptr, 16);
  return Rgb{static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

std::string to_hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::vector<Rgb> default_palette() {
  return {parse_rgb("#ff0000"), parse_rgb("#85ff00"), parse_rgb("#00fff3"), parse_rgb("#6e00ff"),
          parse_rgb("#ff0018")};
}

DigitSet DigitSet::select(const std::vector<std::size_t>& rows) const {
  DigitSet out;
  out.pixels.reserve(rows.size() * kPixels);
  for (auto r : rows) {
    out.pixels.insert(out.pixels.end(), pixels.begin() + static_cast<std::ptrdiff_t>(r * kPixels),
                      pixels.begin() + static_cast<std::ptrdiff_t>((r + 1) * kPixels));
    out.digits.push_back(digits[r]);
    out.ids.push_back(ids[r]);
  }
  return out;
}

DigitSet from_idx(const idx::IdxArray& images, const idx::IdxArray& labels, std::int64_t id_offset) {
  if (images.magic != idx::kMagicImages || images.shape.size() != 3 || images.shape[1] != kSide ||
      images.shape[2] != kSide)
    throw Error("cmnist: images must be an N x 28 x 28 u8 IDX array");
  if (labels.magic != idx::kMagicLabels || labels.shape.size() != 1)
    throw Error("cmnist: labels must be a 1-D u8 IDX array");
  if (images.shape[0] != labels.shape[0])
    throw Error("cmnist: " + std::to_string(images.shape[0]) + " images but " + std::to_string(labels.shape[0]) +
                " labels");
  DigitSet out;
  out.pixels = images.data;
  out.digits = labels.data;
  for (auto d : out.digits)
    if (d > 9) throw Error("cmnist: label " + std::to_string(d) + " is not a digit");
  out.ids.resize(out.digits.size());
  std::iota(out.ids.begin(), out.ids.end(), id_offset);
  return out;
}

datagen::Dataset build_cmnist(const DigitSet& digits, double p_corr, const std::vector<Rgb>& palette,
                              std::uint64_t seed, datagen::Split split) {
  if (!(p_corr > 0.0 && p_corr <= 1.0)) throw ConfigError("p_corr must lie in (0, 1]");
  if (palette.size() != static_cast<std::size_t>(kClasses)) {
    throw ConfigError("palette has " + std::to_string(palette.size()) + " colors but there are " +
                      std::to_string(kClasses) + " classes");
  }
  const std::size_t n = digits.size();
  datagen::Dataset data;
  data.split = split;
  data.seed = seed;
  data.x.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kFeatures));
  data.labels.reserve(n);
  data.groups.reserve(n);
  data.ids = digits.ids;

  Rng rng = make_rng(seed, Stream::cmnist_color, static_cast<std::uint64_t>(split));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, kClasses - 2);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = class_of_digit(digits.digits[i]);
    int color = c;
    if (unit(rng) >= p_corr) {
      color = other(rng);
      if (color >= c) ++color;
    }
    const Rgb& rgb = palette[static_cast<std::size_t>(color)];
    const double ch[3] = {rgb.r / 255.0, rgb.g / 255.0, rgb.b / 255.0};
    auto row = data.x.row(static_cast<Eigen::Index>(i));
    const std::uint8_t* px = digits.pixels.data() + i * kPixels;
    for (std::size_t p = 0; p < kPixels; ++p) {
      if (px[p] == 0) continue;
      const double gray = px[p] / 255.0;
      for (std::size_t k = 0; k < 3; ++k) row[static_cast<Eigen::Index>(k * kPixels + p)] = gray * ch[k];
    }
    data.labels.push_back(c);
    data.groups.push_back({c, color});
  }
  for (const auto& [key, count] : data.group_counts())
    data.group_table.push_back({key.class_id, key.spurious_id, count, key.class_id == key.spurious_id});
  return data;
}

std::vector<std::size_t> stratified_subset(const DigitSet& digits, std::size_t size, std::uint64_t seed) {
  const std::size_t n = digits.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (size == 0 || size >= n) return order;
  Rng rng = make_rng(seed, Stream::cmnist_split, 1);
  std::shuffle(order.begin(), order.end(), rng);
  std::map<int, std::vector<std::size_t>> by_class;
  for (auto r : order) by_class[class_of_digit(digits.digits[r])].push_back(r);
  // Largest-remainder apportionment so the quotas sum to `size`.
  std::vector<std::pair<double, int>> remainders;
  std::map<int, std::size_t> quota;
  std::size_t assigned = 0;
  for (const auto& [c, rows] : by_class) {
    const double exact = static_cast<double>(size) * static_cast<double>(rows.size()) / static_cast<double>(n);
    quota[c] = static_cast<std::size_t>(exact);
    assigned += quota[c];
    remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < size && k < remainders.size(); ++k, ++assigned) ++quota[remainders[k].second];
  std::vector<std::size_t> out;
  for (const auto& [c, rows] : by_class) out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  std::sort(out.begin(), out.end());
  return out;
}

std::filesystem::path locate(const std::filesystem::path& dir, const std::string& name) {
  for (const auto& candidate : {dir / name, dir / (name + ".gz")})
    if (std::filesystem::exists(candidate)) return candidate;
  throw Error("MNIST file '" + name + "' not found in " + dir.string() +
              ". Place the four official IDX files (optionally .gz) there, for example with "
              "`npm pack mnist-data` and copying package/data/*, or from the original MNIST "
              "distribution; nothing is downloaded automatically.");
}

Splits build_cmnist_splits(const std::filesystem::path& mnist_dir, const SplitOptions& options, std::uint64_t seed) {
  const DigitSet train_all = from_idx(idx::load_idx(locate(mnist_dir, kTrainImages)),
                                      idx::load_idx(locate(mnist_dir, kTrainLabels)));
  const DigitSet test_all = from_idx(idx::load_idx(locate(mnist_dir, kTestImages)),
                                     idx::load_idx(locate(mnist_dir, kTestLabels)), 60000);
  if (options.train_size == 0 || options.train_size >= train_all.size())
    throw ConfigError("train_size must lie in (0, " + std::to_string(train_all.size()) + ")");

  std::vector<std::size_t> perm(train_all.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(seed, Stream::cmnist_split, 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> train_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(options.train_size));
  std::vector<std::size_t> val_rows(perm.begin() + static_cast<std::ptrdiff_t>(options.train_size), perm.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());

  const DigitSet train_split = train_all.select(train_rows);
  const DigitSet train = train_split.select(stratified_subset(train_split, options.train_subset, seed));
  const DigitSet test = test_all.select(stratified_subset(test_all, options.test_subset, seed + 1));

  Splits out;
  out.train = build_cmnist(train, options.p_corr, options.palette, seed, datagen::Split::train);
  if (options.build_val) {
    const DigitSet val_split = train_all.select(val_rows);
    const DigitSet val = val_split.select(stratified_subset(val_split, options.val_subset, seed + 2));
    out.val = build_cmnist(val, options.p_corr, options.palette, seed, datagen::Split::val);
  }
  out.test = build_cmnist(test, 1.0 / kClasses, options.palette, seed, datagen::Split::test);
  return out;
}

}  // namespace spare::cmnist
