#pragma once
// Lattice-preserving spatial transforms. Everything here is exact: flips,
// quarter-turn rotations in an axis-aligned plane, crops, and integer
// translations with zero padding. No interpolation anywhere, so the same
// transform applies verbatim to images, masks, weights and score arrays.

#include <array>
#include <variant>

#include "bodyreg/volume.hpp"

namespace bodyreg {

// axes: 0 = z, 1 = y, 2 = x
struct FlipAxis {
  int axis = 0;
};

// quarter_turns counter-clockwise turns in the (axis_a, axis_b) index plane
struct Rotate90 {
  int axis_a = 1;
  int axis_b = 2;
  int quarter_turns = 1;
};

// half-open box [lo, hi) per axis
struct CropBox {
  std::array<Index, 3> lo{0, 0, 0};
  std::array<Index, 3> hi{0, 0, 0};
};

struct TranslateZeroPad {
  Index dz = 0;
  Index dy = 0;
  Index dx = 0;
};

using SpatialTransform = std::variant<FlipAxis, Rotate90, CropBox, TranslateZeroPad>;

// Inverse for flip/rotate/translate; a crop discards data and has none.
SpatialTransform inverse_of(const SpatialTransform& t);

namespace detail {

inline void check_axis(int axis) {
  if (axis < 0 || axis > 2) throw ValidationError("transform axis must be 0, 1 or 2");
}

inline std::array<Index, 3> dims_of(Shape3 s) { return {s.nz, s.ny, s.nx}; }

inline Shape3 shape_from(const std::array<Index, 3>& d) { return {d[0], d[1], d[2]}; }

inline double spacing_axis(const Spacing3& s, int axis) {
  return axis == 0 ? s.z : (axis == 1 ? s.y : s.x);
}

inline void set_spacing_axis(Spacing3& s, int axis, double v) {
  (axis == 0 ? s.z : (axis == 1 ? s.y : s.x)) = v;
}

}  // namespace detail

template <typename Scalar>
VolumeT<Scalar> apply_flip(const VolumeT<Scalar>& v, const FlipAxis& t) {
  detail::check_axis(t.axis);
  VolumeT<Scalar> out = make_volume<Scalar>(v.shape, v.spacing_mm, v.semantic);
  const auto d = detail::dims_of(v.shape);
  for (Index z = 0; z < d[0]; ++z)
    for (Index y = 0; y < d[1]; ++y)
      for (Index x = 0; x < d[2]; ++x) {
        std::array<Index, 3> src{z, y, x};
        src[t.axis] = d[t.axis] - 1 - src[t.axis];
        out.at(z, y, x) = v.at(src[0], src[1], src[2]);
      }
  return out;
}

// One quarter turn: out[ia, ib] = in[ib, n_b - 1 - ia] in the rotation plane.
template <typename Scalar>
VolumeT<Scalar> apply_rot90_once(const VolumeT<Scalar>& v, int axis_a, int axis_b) {
  detail::check_axis(axis_a);
  detail::check_axis(axis_b);
  if (axis_a == axis_b) throw ValidationError("rotation plane needs two distinct axes");

  const auto din = detail::dims_of(v.shape);
  auto dout = din;
  dout[axis_a] = din[axis_b];
  dout[axis_b] = din[axis_a];

  Spacing3 spacing = v.spacing_mm;
  const double sa = detail::spacing_axis(v.spacing_mm, axis_a);
  const double sb = detail::spacing_axis(v.spacing_mm, axis_b);
  detail::set_spacing_axis(spacing, axis_a, sb);
  detail::set_spacing_axis(spacing, axis_b, sa);

  VolumeT<Scalar> out = make_volume<Scalar>(detail::shape_from(dout), spacing, v.semantic);
  for (Index z = 0; z < dout[0]; ++z)
    for (Index y = 0; y < dout[1]; ++y)
      for (Index x = 0; x < dout[2]; ++x) {
        std::array<Index, 3> o{z, y, x};
        std::array<Index, 3> src = o;
        src[axis_a] = o[axis_b];
        src[axis_b] = din[axis_b] - 1 - o[axis_a];
        out.at(z, y, x) = v.at(src[0], src[1], src[2]);
      }
  return out;
}

template <typename Scalar>
VolumeT<Scalar> apply_rot90(const VolumeT<Scalar>& v, const Rotate90& t) {
  int k = ((t.quarter_turns % 4) + 4) % 4;
  VolumeT<Scalar> out = v;
  for (int i = 0; i < k; ++i) out = apply_rot90_once(out, t.axis_a, t.axis_b);
  return out;
}

template <typename Scalar>
VolumeT<Scalar> apply_crop(const VolumeT<Scalar>& v, const CropBox& t) {
  const auto d = detail::dims_of(v.shape);
  for (int a = 0; a < 3; ++a) {
    if (t.lo[a] < 0 || t.hi[a] > d[a] || t.lo[a] >= t.hi[a]) {
      throw ValidationError("crop box outside volume");
    }
  }
  std::array<Index, 3> dout{t.hi[0] - t.lo[0], t.hi[1] - t.lo[1], t.hi[2] - t.lo[2]};
  VolumeT<Scalar> out = make_volume<Scalar>(detail::shape_from(dout), v.spacing_mm, v.semantic);
  for (Index z = 0; z < dout[0]; ++z)
    for (Index y = 0; y < dout[1]; ++y)
      for (Index x = 0; x < dout[2]; ++x)
        out.at(z, y, x) = v.at(z + t.lo[0], y + t.lo[1], x + t.lo[2]);
  return out;
}

template <typename Scalar>
VolumeT<Scalar> apply_translate(const VolumeT<Scalar>& v, const TranslateZeroPad& t) {
  const auto d = detail::dims_of(v.shape);
  VolumeT<Scalar> out = make_volume<Scalar>(v.shape, v.spacing_mm, v.semantic, Scalar(0));
  const std::array<Index, 3> off{t.dz, t.dy, t.dx};
  for (Index z = 0; z < d[0]; ++z)
    for (Index y = 0; y < d[1]; ++y)
      for (Index x = 0; x < d[2]; ++x) {
        const Index sz = z - off[0], sy = y - off[1], sx = x - off[2];
        if (sz >= 0 && sz < d[0] && sy >= 0 && sy < d[1] && sx >= 0 && sx < d[2]) {
          out.at(z, y, x) = v.at(sz, sy, sx);
        }
      }
  return out;
}

template <typename Scalar>
VolumeT<Scalar> apply_transform(const VolumeT<Scalar>& v, const SpatialTransform& t) {
  validate_volume(v);
  return std::visit(
      [&](const auto& op) -> VolumeT<Scalar> {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, FlipAxis>) return apply_flip(v, op);
        if constexpr (std::is_same_v<T, Rotate90>) return apply_rot90(v, op);
        if constexpr (std::is_same_v<T, CropBox>) return apply_crop(v, op);
        if constexpr (std::is_same_v<T, TranslateZeroPad>) return apply_translate(v, op);
      },
      t);
}

inline SpatialTransform inverse_of(const SpatialTransform& t) {
  return std::visit(
      [](const auto& op) -> SpatialTransform {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, FlipAxis>) {
          return op;
        } else if constexpr (std::is_same_v<T, Rotate90>) {
          Rotate90 inv = op;
          inv.quarter_turns = (4 - ((op.quarter_turns % 4) + 4) % 4) % 4;
          return inv;
        } else if constexpr (std::is_same_v<T, TranslateZeroPad>) {
          return TranslateZeroPad{-op.dz, -op.dy, -op.dx};
        } else {
          throw ValidationError("a crop discards voxels and has no inverse transform");
        }
      },
      t);
}

}  // namespace bodyreg
