#pragma once

#include "spare/datagen.hpp"
#include "spare/idx.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spare::cmnist {

inline constexpr std::size_t kSide = 28;
inline constexpr std::size_t kPixels = kSide * kSide;
inline constexpr std::size_t kFeatures = 3 * kPixels;  // channel-major RGB
inline constexpr int kClasses = 5;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Parses "#rrggbb" or "rrggbb".
Rgb parse_rgb(const std::string& hex);
std::string to_hex(const Rgb& c);

std::vector<Rgb> default_palette();

constexpr int class_of_digit(int digit) { return digit / 2; }

/// Raw grayscale digits: `pixels` holds count * 784 bytes in IDX order.
struct DigitSet {
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> digits;
  std::vector<std::int64_t> ids;  // index in the source file

  std::size_t size() const { return digits.size(); }
  DigitSet select(const std::vector<std::size_t>& rows) const;
};

DigitSet from_idx(const idx::IdxArray& images, const idx::IdxArray& labels, std::int64_t id_offset = 0);

/// Each class keeps its own color with probability p_corr and otherwise takes
/// a uniformly random color among the other classes. Foreground pixels
/// (intensity > 0) become gray/255 * color/255 per channel. Group id is
/// (class, color index); the group whose color index equals the class is the
/// majority group.
datagen::Dataset build_cmnist(const DigitSet& digits, double p_corr, const std::vector<Rgb>& palette,
                              std::uint64_t seed, datagen::Split split);

/// Row indices forming a class-stratified subset of size about `size`,
/// chosen at random from `seed`. size 0 or size >= digits.size() keeps everything.
std::vector<std::size_t> stratified_subset(const DigitSet& digits, std::size_t size, std::uint64_t seed);

struct SplitOptions {
  double p_corr = 0.995;
  std::vector<Rgb> palette = default_palette();
  std::size_t train_size = 50000;  // taken from the official training file
  std::size_t train_subset = 0;    // 0 keeps the whole train split
  std::size_t val_subset = 0;
  std::size_t test_subset = 0;
  bool build_val = true;
};

struct Splits {
  datagen::Dataset train;
  std::optional<datagen::Dataset> val;
  datagen::Dataset test;
};

inline constexpr const char* kTrainImages = "train-images-idx3-ubyte";
inline constexpr const char* kTrainLabels = "train-labels-idx1-ubyte";
inline constexpr const char* kTestImages = "t10k-images-idx3-ubyte";
inline constexpr const char* kTestLabels = "t10k-labels-idx1-ubyte";

/// Finds `<dir>/<name>` or `<dir>/<name>.gz`; throws with download
/// instructions when neither exists.
std::filesystem::path locate(const std::filesystem::path& dir, const std::string& name);

/// Train/val come from a seeded random split of the official training file
/// and are colored with p_corr. Test is the official test file with colors
/// drawn uniformly over the palette.
Splits build_cmnist_splits(const std::filesystem::path& mnist_dir, const SplitOptions& options,
                           std::uint64_t seed);

}  // namespace spare::cmnist
