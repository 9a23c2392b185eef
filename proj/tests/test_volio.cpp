#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "bodyreg/volume_io.hpp"
#include "test_support.hpp"

using namespace bodyreg;

TEST_CASE("2x2x2 f32 volume writes a 32-byte raw file with the right header") {
  testutil::ScratchDir dir("volio_size");
  const auto v = make_volume<float>({2, 2, 2}, {1, 1, 1}, Semantic::image);
  write_volume(v, dir / "zeros");

  CHECK(std::filesystem::file_size(dir / "zeros.vol.raw") == 32);

  std::ifstream hf(dir / "zeros.vol.json");
  nlohmann::json header;
  hf >> header;
  CHECK(header["shape"] == nlohmann::json({2, 2, 2}));
  CHECK(header["dtype"] == "f32");
  CHECK(header["semantic"] == "image");
}

TEST_CASE("round-trip of a random f32 volume is bit-identical") {
  testutil::ScratchDir dir("volio_roundtrip");
  const auto v = testutil::random_f32_volume({3, 4, 5}, 7);
  write_volume(v, dir / "v");
  const auto back = read_volume_f32(dir / "v");

  CHECK(back.shape == v.shape);
  CHECK(back.spacing_mm == v.spacing_mm);
  CHECK(back.semantic == v.semantic);
  REQUIRE(back.data.size() == v.data.size());
  CHECK(std::memcmp(back.data.data(), v.data.data(),
                    static_cast<std::size_t>(v.data.size()) * sizeof(float)) == 0);
}

TEST_CASE("NaN payloads survive the round-trip") {
  testutil::ScratchDir dir("volio_nan");
  auto v = make_volume<float>({1, 1, 4}, {2, 2, 2}, Semantic::image);
  const std::uint32_t payload = 0x7fc0dead;  // quiet NaN with a payload
  v.data[0] = std::bit_cast<float>(payload);
  v.data[1] = -0.0f;
  v.data[2] = std::numeric_limits<float>::infinity();
  write_volume(v, dir / "v");
  const auto back = read_volume_f32(dir / "v");
  CHECK(std::bit_cast<std::uint32_t>(back.data[0]) == payload);
  CHECK(std::bit_cast<std::uint32_t>(back.data[1]) == std::bit_cast<std::uint32_t>(-0.0f));
  CHECK(back.data[2] == std::numeric_limits<float>::infinity());
}

TEST_CASE("u8 round-trip and binary-mask enforcement") {
  testutil::ScratchDir dir("volio_u8");
  auto mask = testutil::random_mask({4, 4, 4}, 3);
  write_volume(mask, dir / "m");
  const auto back = read_volume_u8(dir / "m");
  CHECK((back.data == mask.data).all());

  SUBCASE("a 2 in a label volume is rejected on write") {
    mask.data[5] = 2;
    CHECK_THROWS_AS(write_volume(mask, dir / "bad"), ValidationError);
  }
  SUBCASE("a 2 in an image-semantic u8 volume is fine") {
    auto counts = mask;
    counts.semantic = Semantic::image;
    counts.data[5] = 2;
    write_volume(counts, dir / "counts");
    CHECK(read_volume_u8(dir / "counts").data[5] == 2);
  }
}

TEST_CASE("truncated raw file is a length-mismatch error") {
  testutil::ScratchDir dir("volio_trunc");
  const auto v = testutil::random_f32_volume({2, 3, 2}, 11);
  write_volume(v, dir / "v");
  std::filesystem::resize_file(dir / "v.vol.raw",
                               std::filesystem::file_size(dir / "v.vol.raw") - 1);
  CHECK_THROWS_AS(read_volume(dir / "v"), IoError);
}

TEST_CASE("missing files and unknown dtype") {
  testutil::ScratchDir dir("volio_missing");
  CHECK_THROWS_AS(read_volume(dir / "nope"), IoError);

  const auto v = testutil::random_f32_volume({2, 2, 2}, 1);
  write_volume(v, dir / "v");
  std::filesystem::remove(dir / "v.vol.raw");
  CHECK_THROWS_AS(read_volume(dir / "v"), IoError);

  std::ofstream hf(dir / "w.vol.json");
  hf << R"({"shape":[1,1,1],"spacing_mm":[1,1,1],"dtype":"f64","semantic":"image"})";
  hf.close();
  std::ofstream rf(dir / "w.vol.raw", std::ios::binary);
  rf << "12345678";
  rf.close();
  CHECK_THROWS_AS(read_volume(dir / "w"), IoError);
}

TEST_CASE("non-positive header shape is a validation error") {
  testutil::ScratchDir dir("volio_shape");
  std::ofstream hf(dir / "z.vol.json");
  hf << R"({"shape":[0,4,4],"spacing_mm":[1,1,1],"dtype":"f32","semantic":"image"})";
  hf.close();
  std::ofstream rf(dir / "z.vol.raw", std::ios::binary);
  rf.close();
  CHECK_THROWS_AS(read_volume(dir / "z"), ValidationError);
}

TEST_CASE("header serialization is byte-stable") {
  testutil::ScratchDir dir("volio_stable");
  const auto v = testutil::random_f32_volume({2, 2, 3}, 5);
  write_volume(v, dir / "a");
  write_volume(v, dir / "b");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir / "a.vol.json") == slurp(dir / "b.vol.json"));
  CHECK(slurp(dir / "a.vol.raw") == slurp(dir / "b.vol.raw"));
}

TEST_CASE("property: write/read is the identity on random volumes") {
  testutil::ScratchDir dir("volio_prop");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Shape3 shape{static_cast<Index>(1 + rng.uniform_index(5)),
                       static_cast<Index>(1 + rng.uniform_index(5)),
                       static_cast<Index>(1 + rng.uniform_index(5))};
    if (seed % 2 == 0) {
      const auto v = testutil::random_f32_volume(shape, seed + 100);
      write_volume(v, dir / "p");
      CHECK((read_volume_f32(dir / "p").data == v.data).all());
    } else {
      const auto v = testutil::random_mask(shape, seed + 100);
      write_volume(v, dir / "p");
      CHECK((read_volume_u8(dir / "p").data == v.data).all());
    }
  }
}
