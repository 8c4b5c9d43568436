#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace metagen {

// Reader for the big-endian IDX container used by the MNIST distribution.
// Only unsigned-byte payloads are accepted: magic 0x00000803 (3-d image
// tensor) and 0x00000801 (1-d label vector).

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

enum class IdxErrorKind { kWrongMagic, kTruncated, kDimensionOverflow };

class IdxError : public std::runtime_error {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  IdxErrorKind kind() const { return kind_; }

 private:
  IdxErrorKind kind_;
};

struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;  // row-major

  std::size_t rank() const { return dims.size(); }
  std::uint8_t at(std::size_t i) const { return data.at(i); }
  std::uint8_t at(std::size_t i, std::size_t j, std::size_t k) const {
    return data.at((i * dims.at(1) + j) * dims.at(2) + k);
  }
};

IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
IdxTensor load_idx_file(const std::filesystem::path& path);

}  // namespace metagen
