#pragma once
// Prediction cleanup baselines: connected-component analysis with largest-
// component filtering, and score-interval cropping that zeroes predicted
// voxels outside the (margin-widened) valid region.

#include <cstdint>
#include <vector>

#include "bodyreg/calibrate.hpp"
#include "bodyreg/volume.hpp"

namespace bodyreg {

enum class Connectivity { six = 6, twenty_six = 26 };

Connectivity connectivity_from_int(int c);

struct ComponentSet {
  Eigen::Array<std::uint32_t, Eigen::Dynamic, 1> labels;  // 0 = background
  Shape3 shape{};
  Spacing3 spacing_mm{};
  Connectivity connectivity = Connectivity::twenty_six;
  std::vector<Index> voxel_counts;  // voxel_counts[i] belongs to component id i+1

  std::size_t count() const { return voxel_counts.size(); }
  double volume_mm3(std::size_t component) const {
    return static_cast<double>(voxel_counts[component]) * spacing_mm.voxel_mm3();
  }
};

// Component ids are assigned in z-major order of each component's first voxel,
// starting at 1.
ComponentSet connected_components(const VolumeU8& mask, Connectivity connectivity);

// Keeps only the largest component; size ties go to the component whose first
// voxel comes earliest in z-major order (the lower id).
VolumeU8 largest_component_filter(const VolumeU8& mask, Connectivity connectivity);

// Zeroes voxels whose slice score lies outside
// [S_min - margin * sigma_min, S_max + margin * sigma_max].
VolumeU8 bpr_crop(const VolumeU8& pred, const VolumeF& scores3d, const ClassRegion& region,
                  double margin_sigma);

struct CropTuneCase {
  VolumeU8 pred;
  VolumeU8 ground_truth;
  VolumeF scores3d;
};

// Margin with the best mean Dice after cropping; exact ties go to the larger
// (safer) margin.
double tune_crop_margin(const std::vector<CropTuneCase>& cases, const ClassRegion& region,
                        const std::vector<double>& margins);

}  // namespace bodyreg
