#include <vector>

#include "doctest.h"
#include "metagen/idx.hpp"

using namespace metagen;

namespace {
const std::string kFixtures = METAGEN_SOURCE_DIR "/tests/fixtures/";

IdxErrorKind kind_of(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_idx(bytes);
  } catch (const IdxError& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return IdxErrorKind::kWrongMagic;
}
}  // namespace

TEST_CASE("single pixel image tensor") {
  const std::vector<std::uint8_t> bytes = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0x7F};
  const auto t = parse_idx(bytes);
  CHECK(t.dims == std::vector<std::uint32_t>{1, 1, 1});
  CHECK(t.at(0, 0, 0) == 127);
  const auto f = load_idx_file(kFixtures + "single_pixel.idx");
  CHECK(f.dims == t.dims);
  CHECK(f.data == t.data);
}

TEST_CASE("label vector and multi-dimensional images are row-major") {
  const auto labels = load_idx_file(kFixtures + "labels_small.idx");
  REQUIRE(labels.rank() == 1);
  CHECK(labels.data == std::vector<std::uint8_t>{0, 1, 9});
  const auto images = load_idx_file(kFixtures + "images_2x2x3.idx");
  REQUIRE(images.dims == std::vector<std::uint32_t>{2, 2, 3});
  CHECK(images.at(0, 0, 0) == 0);
  CHECK(images.at(0, 1, 2) == 5);
  CHECK(images.at(1, 0, 1) == 7);
  CHECK(images.at(1, 1, 2) == 11);
}

TEST_CASE("malformed streams raise distinct errors") {
  CHECK(kind_of({0x12, 0x34, 0x56, 0x78, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0}) ==
        IdxErrorKind::kWrongMagic);
  std::vector<std::uint8_t> truncated = {0, 0, 8, 1, 0, 0, 0, 10, 1, 2, 3, 4, 5};
  CHECK(kind_of(truncated) == IdxErrorKind::kTruncated);
  CHECK(kind_of({0, 0, 8, 3, 0, 0, 0, 1}) == IdxErrorKind::kTruncated);
  CHECK(kind_of({0, 0}) == IdxErrorKind::kTruncated);
  CHECK(kind_of({0, 0, 8, 3, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF,
                 0xFF}) == IdxErrorKind::kDimensionOverflow);

  for (auto [file, kind] : {std::pair{"wrong_magic.idx", IdxErrorKind::kWrongMagic},
                            std::pair{"truncated.idx", IdxErrorKind::kTruncated},
                            std::pair{"overflow.idx", IdxErrorKind::kDimensionOverflow}}) {
    CAPTURE(file);
    try {
      load_idx_file(kFixtures + file);
      FAIL("expected an IdxError");
    } catch (const IdxError& e) {
      CHECK(e.kind() == kind);
    }
  }
}

TEST_CASE("missing file is reported with its path") {
  CHECK_THROWS_WITH_AS(load_idx_file(kFixtures + "nope.idx"),
                       doctest::Contains("nope.idx"), std::runtime_error);
}
