#include "spare/idx.hpp"

#include <zlib.h>

#include <cstdio>
#include <limits>

namespace spare::idx {

const char* to_string(IdxErrorCode code) {
  switch (code) {
    case IdxErrorCode::unsupported_magic: return "unsupported magic";
    case IdxErrorCode::truncated_header: return "truncated header";
    case IdxErrorCode::truncated_payload: return "truncated payload";
    case IdxErrorCode::trailing_bytes: return "payload longer than header product";
    case IdxErrorCode::dimension_overflow: return "dimension overflow";
    case IdxErrorCode::io: return "i/o error";
  }
  return "?";
}

IdxError::IdxError(IdxErrorCode code, const std::string& what)
    : Error(std::string("idx: ") + to_string(code) + ": " + what), code_(code) {}

std::size_t IdxArray::count() const {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

namespace {

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::size_t rank_of(std::uint32_t magic) {
  if (magic == kMagicLabels) return 1;
  if (magic == kMagicImages) return 3;
  return 0;
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw IdxError(IdxErrorCode::truncated_header, "missing magic");
  IdxArray out;
  out.magic = read_be32(bytes.data());
  const std::size_t rank = rank_of(out.magic);
  if (rank == 0) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", out.magic);
    throw IdxError(IdxErrorCode::unsupported_magic, buf);
  }
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) throw IdxError(IdxErrorCode::truncated_header, "missing dimension sizes");
  std::size_t total = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    const std::uint32_t dim = read_be32(bytes.data() + 4 + 4 * k);
    if (dim != 0 && total > std::numeric_limits<std::size_t>::max() / dim)
      throw IdxError(IdxErrorCode::dimension_overflow, "product of dimensions does not fit in size_t");
    total *= dim;
    out.shape.push_back(dim);
  }
  const std::size_t payload = bytes.size() - header;
  if (payload < total) {
    throw IdxError(IdxErrorCode::truncated_payload,
                   "expected " + std::to_string(total) + " bytes, got " + std::to_string(payload));
  }
  if (payload > total) {
    throw IdxError(IdxErrorCode::trailing_bytes,
                   "expected " + std::to_string(total) + " bytes, got " + std::to_string(payload));
  }
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

std::vector<std::uint8_t> write_idx(const IdxArray& array) {
  if (rank_of(array.magic) != array.shape.size())
    throw IdxError(IdxErrorCode::unsupported_magic, "magic does not match rank");
  if (array.data.size() != array.count())
    throw IdxError(IdxErrorCode::truncated_payload, "payload size does not match shape");
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * array.shape.size() + array.data.size());
  put_be32(out, array.magic);
  for (auto s : array.shape) put_be32(out, s);
  out.insert(out.end(), array.data.begin(), array.data.end());
  return out;
}

IdxArray load_idx(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw IdxError(IdxErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int got = gzread(f, buf, sizeof buf);
    if (got < 0) {
      gzclose(f);
      throw IdxError(IdxErrorCode::io, "cannot read " + path.string());
    }
    if (got == 0) break;
    bytes.insert(bytes.end(), buf, buf + got);
  }
  gzclose(f);
  return parse_idx(bytes);
}

}  // namespace spare::idx
