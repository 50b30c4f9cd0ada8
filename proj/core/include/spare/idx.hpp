#pragma once

#include "spare/types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace spare::idx {

inline constexpr std::uint32_t kMagicLabels = 0x00000801;  // 1-D u8
inline constexpr std::uint32_t kMagicImages = 0x00000803;  // 3-D u8

enum class IdxErrorCode {
  unsupported_magic,
  truncated_header,
  truncated_payload,
  trailing_bytes,
  dimension_overflow,
  io,
};

const char* to_string(IdxErrorCode code);

class IdxError : public Error {
 public:
  IdxError(IdxErrorCode code, const std::string& what);
  IdxErrorCode code() const noexcept { return code_; }

 private:
  IdxErrorCode code_;
};

struct IdxArray {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> shape;
  std::vector<std::uint8_t> data;

  std::size_t count() const;  // product of shape
};

/// Big-endian header, one u32 per dimension, then exactly prod(shape) bytes.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> write_idx(const IdxArray& array);

/// Reads a raw or gzip-compressed IDX file.
IdxArray load_idx(const std::filesystem::path& path);

}  // namespace spare::idx
