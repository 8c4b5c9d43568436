#include "metagen/idx.hpp"

#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace metagen {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

}  // namespace

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw IdxError(IdxErrorKind::kTruncated, "idx: stream shorter than the 4-byte magic");
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  std::size_t rank = 0;
  if (magic == kIdxImagesMagic) {
    rank = 3;
  } else if (magic == kIdxLabelsMagic) {
    rank = 1;
  } else {
    std::ostringstream msg;
    msg << "idx: unsupported magic 0x" << std::hex << magic;
    throw IdxError(IdxErrorKind::kWrongMagic, msg.str());
  }

  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) {
    throw IdxError(IdxErrorKind::kTruncated, "idx: header truncated");
  }

  IdxTensor out;
  out.dims.reserve(rank);
  std::size_t total = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    const std::uint32_t extent = read_be32(bytes, 4 + 4 * d);
    out.dims.push_back(extent);
    if (extent != 0 && total > std::numeric_limits<std::size_t>::max() / extent) {
      throw IdxError(IdxErrorKind::kDimensionOverflow, "idx: element count overflows size_t");
    }
    total *= extent;
  }
  // Payload offsets must stay addressable as well.
  if (total > std::numeric_limits<std::size_t>::max() - header) {
    throw IdxError(IdxErrorKind::kDimensionOverflow, "idx: payload size overflows size_t");
  }

  const std::size_t available = bytes.size() - header;
  if (available < total) {
    std::ostringstream msg;
    msg << "idx: header promises " << total << " payload bytes, " << available << " present";
    throw IdxError(IdxErrorKind::kTruncated, msg.str());
  }
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                  bytes.begin() + static_cast<std::ptrdiff_t>(header + total));
  return out;
}

IdxTensor load_idx_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("idx: cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

}  // namespace metagen
