#pragma once

#include "spare/datagen.hpp"

#include <filesystem>

namespace spare::io {

inline constexpr char kDatasetMagic[4] = {'S', 'P', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;

/// Writes `<stem>.spds` (binary tensors) and `<stem>.json` (bank, group
/// table, ids, seed). Labels are stored as the two's complement bit pattern
/// of the int32 label; group ids index the JSON group table.
void save_dataset(const datagen::Dataset& data, const std::filesystem::path& stem);

datagen::Dataset load_dataset(const std::filesystem::path& stem);

}  // namespace spare::io
