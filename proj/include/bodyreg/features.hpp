#pragma once
// Handcrafted per-voxel features: raw intensity, box means/std over small
// neighborhoods, and the per-slice body-area fraction that tells the model
// roughly where along the body axis a voxel sits without leaking slice scores.

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bodyreg/volume.hpp"

namespace bodyreg {

struct FeatureExtractor {
  bool intensity = true;
  bool box_mean_r1 = true;
  bool box_mean_r2 = true;
  bool box_std_r2 = true;
  bool body_area_fraction = true;
  double body_threshold = 0.5;  // intensity above which a voxel counts as body

  int count() const {
    return int(intensity) + int(box_mean_r1) + int(box_mean_r2) + int(box_std_r2) +
           int(body_area_fraction);
  }
  std::vector<std::string> names() const;
};

// Fraction of voxels above body_threshold, one value per axial slice.
Eigen::ArrayXd slice_body_fraction(const VolumeF& image, double body_threshold);

// N x F feature matrix, rows in z-major voxel order. Box statistics average
// over the in-bounds part of the window, so a constant image yields zero std
// everywhere including borders.
Eigen::MatrixXd extract_features(const VolumeF& image, const FeatureExtractor& fx);

// Same features restricted to a patch [corner, corner+size) of the image.
// slice_fraction must come from slice_body_fraction over the full image.
Eigen::MatrixXd extract_patch_features(const VolumeF& image,
                                       const Eigen::ArrayXd& slice_fraction,
                                       const FeatureExtractor& fx,
                                       const std::array<Index, 3>& corner,
                                       const std::array<Index, 3>& size);

}  // namespace bodyreg
