#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bodyreg/transforms.hpp"
#include "test_support.hpp"

using namespace bodyreg;

TEST_CASE("z-flip reverses an expanded score stack") {
  auto v = make_volume<float>({3, 1, 1}, {1, 1, 1}, Semantic::scores3d);
  v.data << 0.0f, 50.0f, 100.0f;
  const auto flipped = apply_transform(v, FlipAxis{0});
  CHECK(flipped.data[0] == 100.0f);
  CHECK(flipped.data[1] == 50.0f);
  CHECK(flipped.data[2] == 0.0f);
}

TEST_CASE("crop keeps the requested slab") {
  auto v = make_volume<float>({3, 1, 1}, {1, 1, 1}, Semantic::image);
  v.data << 1.0f, 2.0f, 3.0f;
  const auto cropped = apply_transform(v, CropBox{{1, 0, 0}, {3, 1, 1}});
  CHECK(cropped.shape == Shape3{2, 1, 1});
  CHECK(cropped.data[0] == 2.0f);
  CHECK(cropped.data[1] == 3.0f);

  CHECK_THROWS_AS(apply_transform(v, CropBox{{0, 0, 0}, {4, 1, 1}}), ValidationError);
  CHECK_THROWS_AS(apply_transform(v, CropBox{{2, 0, 0}, {2, 1, 1}}), ValidationError);
}

TEST_CASE("identity-like transforms are bit-exact") {
  const auto v = testutil::random_f32_volume({4, 3, 5}, 21);
  const auto t0 = apply_transform(v, TranslateZeroPad{0, 0, 0});
  CHECK((t0.data == v.data).all());
  const auto r0 = apply_transform(v, Rotate90{1, 2, 0});
  CHECK((r0.data == v.data).all());
  const auto full = apply_transform(v, CropBox{{0, 0, 0}, {4, 3, 5}});
  CHECK((full.data == v.data).all());
}

TEST_CASE("flips are self-inverse and rotations compose to identity") {
  const auto v = testutil::random_f32_volume({4, 3, 5}, 33);
  for (int axis = 0; axis < 3; ++axis) {
    const auto once = apply_transform(v, FlipAxis{axis});
    const auto twice = apply_transform(once, FlipAxis{axis});
    CHECK((twice.data == v.data).all());
  }
  const int planes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  for (const auto& p : planes) {
    for (int k = 1; k <= 3; ++k) {
      const Rotate90 rot{p[0], p[1], k};
      const auto turned = apply_transform(v, rot);
      const auto back = apply_transform(turned, std::get<Rotate90>(inverse_of(rot)));
      CHECK((back.data == v.data).all());
    }
  }
}

TEST_CASE("a quarter turn in the (y,x) plane moves voxels where expected") {
  // 1x2x2 volume: [[a, b], [c, d]] -> [[b, d], [a, c]]
  auto v = make_volume<float>({1, 2, 2}, {1, 1, 1}, Semantic::image);
  v.at(0, 0, 0) = 1.0f;  // a
  v.at(0, 0, 1) = 2.0f;  // b
  v.at(0, 1, 0) = 3.0f;  // c
  v.at(0, 1, 1) = 4.0f;  // d
  const auto r = apply_transform(v, Rotate90{1, 2, 1});
  CHECK(r.at(0, 0, 0) == 2.0f);
  CHECK(r.at(0, 0, 1) == 4.0f);
  CHECK(r.at(0, 1, 0) == 1.0f);
  CHECK(r.at(0, 1, 1) == 3.0f);
}

TEST_CASE("rotation swaps shape and spacing of the plane axes") {
  auto v = make_volume<float>({2, 3, 5}, {1.0, 2.0, 3.0}, Semantic::image);
  const auto r = apply_transform(v, Rotate90{1, 2, 1});
  CHECK(r.shape == Shape3{2, 5, 3});
  CHECK(r.spacing_mm == Spacing3{1.0, 3.0, 2.0});
}

TEST_CASE("translation zero-pads and inverts on the overlap") {
  const auto v = testutil::random_f32_volume({4, 4, 4}, 55);
  const TranslateZeroPad t{1, -2, 0};
  const auto moved = apply_transform(v, t);
  const auto back = apply_transform(moved, std::get<TranslateZeroPad>(inverse_of(t)));
  for (Index z = 0; z < 4; ++z)
    for (Index y = 0; y < 4; ++y)
      for (Index x = 0; x < 4; ++x) {
        // voxels that stayed in bounds both ways must match exactly
        const bool in_overlap = z + 1 < 4 && y - 2 >= 0;
        if (in_overlap) CHECK(back.at(z, y, x) == v.at(z, y, x));
      }
}

TEST_CASE("crop followed by re-reading the same box matches the original region") {
  const auto v = testutil::random_f32_volume({5, 6, 7}, 77);
  const CropBox box{{1, 2, 0}, {4, 5, 7}};
  const auto cropped = apply_transform(v, box);
  for (Index z = 0; z < cropped.shape.nz; ++z)
    for (Index y = 0; y < cropped.shape.ny; ++y)
      for (Index x = 0; x < cropped.shape.nx; ++x) {
        CHECK(cropped.at(z, y, x) == v.at(z + 1, y + 2, x + 0));
      }
  CHECK_THROWS_AS(inverse_of(SpatialTransform{box}), ValidationError);
}

TEST_CASE("masks transform with the same lattice semantics") {
  const auto m = testutil::random_mask({3, 4, 5}, 91);
  const auto flipped = apply_transform(m, FlipAxis{2});
  for (Index z = 0; z < 3; ++z)
    for (Index y = 0; y < 4; ++y)
      for (Index x = 0; x < 5; ++x) CHECK(flipped.at(z, y, x) == m.at(z, y, 4 - x));
}
