#pragma once
// Penalty on predicted foreground in implausible body regions: a per-voxel
// weight that is 0 inside the valid score interval and rises as a Gaussian
// complement outside, a weighted BCE with ground truth fixed at 0, and a
// top-k average over the invalid-region voxels so the few worst offenders
// carry the signal.

#include <vector>

#include <Eigen/Core>

#include "bodyreg/calibrate.hpp"
#include "bodyreg/volume.hpp"

namespace bodyreg {

inline constexpr double kDefaultClampEps = 1e-7;

// 0 inside [S_min, S_max]; 1 - exp(-(s - boundary)^2 / (2 sigma^2)) outside.
// Continuous in s, range [0, 1).
double region_weight(double s, const ClassRegion& r);

Eigen::ArrayXd region_weight_array(const Eigen::ArrayXd& scores, const ClassRegion& r);

struct WeightField {
  VolumeF weights;     // f32 field, one weight per voxel
  ClassRegion region;  // boundaries and smoothing widths the field was built from
};

// Voxelwise weights over an expanded score volume. Scores must be finite.
WeightField weight_field(const VolumeF& scores3d, const ClassRegion& r);

// Weighted BCE for ground truth 0: -w * log(1 - min(yhat, 1 - eps)).
// The clamp only caps the top end, so yhat = 0 gives exactly 0.
double wbce(double yhat, double w, double eps = kDefaultClampEps);

struct LossReport {
  double value = 0.0;
  Index m_selected = 0;                // M, size of the top-k set
  Index n_invalid = 0;                 // voxels with weight > 0
  std::vector<Index> selected_indices; // ascending
  Eigen::ArrayXd grad;                 // d value / d yhat, zero off the selected set
};

// Top-k regional penalty. N_hat counts voxels with w > 0; M = max(1,
// floor(N_hat * k / 100)) when N_hat > 0. value = alpha / M * sum of the M
// largest wBCE values; ties at the M-th value break by ascending voxel index.
LossReport region_loss(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& weights,
                       double alpha, double k_percent, double eps = kDefaultClampEps);

// Volume front-end; computes in double, reports grad aligned to yhat's buffer.
LossReport region_loss(const VolumeF& yhat, const WeightField& wf, double alpha,
                       double k_percent, double eps = kDefaultClampEps);

}  // namespace bodyreg
