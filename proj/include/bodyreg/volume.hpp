#pragma once
// Dense 3D voxel grids. One scalar-templated carrier type holds images, labels,
// predictions, weight fields and expanded score arrays; the flat buffer is
// z-major so an axial slice is contiguous.

#include <cstdint>
#include <sstream>

#include <Eigen/Core>

#include "bodyreg/types.hpp"

namespace bodyreg {

template <typename Scalar>
struct VolumeT {
  using Buffer = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Shape3 shape{};
  Spacing3 spacing_mm{};
  Semantic semantic = Semantic::image;
  Buffer data;

  Index size() const { return data.size(); }

  Index flat_index(Index z, Index y, Index x) const {
    return (z * shape.ny + y) * shape.nx + x;
  }

  Scalar& at(Index z, Index y, Index x) { return data[flat_index(z, y, x)]; }
  Scalar at(Index z, Index y, Index x) const { return data[flat_index(z, y, x)]; }
};

using VolumeF = VolumeT<float>;
using VolumeU8 = VolumeT<std::uint8_t>;

template <typename Scalar>
VolumeT<Scalar> make_volume(Shape3 shape, Spacing3 spacing, Semantic semantic,
                            Scalar fill = Scalar(0)) {
  VolumeT<Scalar> v;
  v.shape = shape;
  v.spacing_mm = spacing;
  v.semantic = semantic;
  v.data = VolumeT<Scalar>::Buffer::Constant(shape.total(), fill);
  return v;
}

template <typename To, typename From>
VolumeT<To> cast_volume(const VolumeT<From>& v) {
  VolumeT<To> out;
  out.shape = v.shape;
  out.spacing_mm = v.spacing_mm;
  out.semantic = v.semantic;
  out.data = v.data.template cast<To>();
  return out;
}

template <typename Scalar>
bool same_grid(const VolumeT<Scalar>& a, const VolumeT<Scalar>& b) {
  return a.shape == b.shape;
}

// Binary masks live in u8 volumes tagged label/prediction.
template <typename Scalar>
constexpr bool is_mask_semantic(const VolumeT<Scalar>& v) {
  return v.semantic == Semantic::label || v.semantic == Semantic::prediction;
}

// Throws ValidationError on any broken invariant: non-positive shape or
// spacing, buffer length mismatch, non-binary values in a u8 mask.
template <typename Scalar>
void validate_volume(const VolumeT<Scalar>& v) {
  if (v.shape.nz <= 0 || v.shape.ny <= 0 || v.shape.nx <= 0) {
    std::ostringstream os;
    os << "volume shape must be positive, got [" << v.shape.nz << "," << v.shape.ny << ","
       << v.shape.nx << "]";
    throw ValidationError(os.str());
  }
  if (v.spacing_mm.z <= 0 || v.spacing_mm.y <= 0 || v.spacing_mm.x <= 0) {
    throw ValidationError("volume spacing must be positive");
  }
  if (v.data.size() != v.shape.total()) {
    std::ostringstream os;
    os << "volume buffer length " << v.data.size() << " does not match shape product "
       << v.shape.total();
    throw ValidationError(os.str());
  }
  if constexpr (std::is_same_v<Scalar, std::uint8_t>) {
    if (is_mask_semantic(v) && v.data.size() > 0 && (v.data > 1).any()) {
      throw ValidationError("u8 " + to_string(v.semantic) +
                            " volume must be binary (values 0 or 1)");
    }
  }
}

}  // namespace bodyreg
