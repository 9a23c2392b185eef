#pragma once
// Core scalar/grid types and the two error categories used across the library.

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace bodyreg {

using Index = Eigen::Index;

// Invalid inputs, broken invariants, contract violations. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing/unreadable/unwritable files, corrupt containers. CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Grid extents, z-major: index = (z * ny + y) * nx + x. z grows toward the head.
struct Shape3 {
  Index nz = 0;
  Index ny = 0;
  Index nx = 0;

  Index total() const { return nz * ny * nx; }
  bool operator==(const Shape3&) const = default;
};

// Physical voxel size in millimetres, per axis.
struct Spacing3 {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;

  double voxel_mm3() const { return z * y * x; }
  bool operator==(const Spacing3&) const = default;
};

enum class Semantic { image, label, prediction, weights, scores3d };

std::string to_string(Semantic s);
Semantic semantic_from_string(const std::string& s);

}  // namespace bodyreg
