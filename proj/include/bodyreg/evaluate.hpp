#pragma once
// Evaluation: Dice overlap, volume-thresholded false-positive analysis that
// classifies predicted components as inside or outside the valid score
// interval, and bootstrap ranking stability across algorithms.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bodyreg/calibrate.hpp"
#include "bodyreg/postprocess.hpp"
#include "bodyreg/volume.hpp"

namespace bodyreg {

// 2|A∩B| / (|A|+|B|); two empty masks give 1 by convention.
double dice(const VolumeU8& a, const VolumeU8& b);

struct FpComponent {
  double volume_mm3 = 0.0;
  double median_score = 0.0;
  bool out_of_region = false;
};

struct FPReport {
  int class_id = 0;
  double volume_threshold_mm3 = 0.0;
  double margin_sigma = 0.0;
  std::vector<FpComponent> components;  // only components above the threshold
  int n_in_region = 0;
  int n_out_of_region = 0;
};

// Components of the prediction with volume >= threshold, classified
// out_of_region when their median voxel score lies outside
// [S_min - margin*sigma_min, S_max + margin*sigma_max].
FPReport fp_analysis(const VolumeU8& pred, const VolumeF& scores3d,
                     const ClassRegion& region, double volume_threshold_mm3 = 1000.0,
                     double margin_sigma = 0.0,
                     Connectivity connectivity = Connectivity::twenty_six);

// 100 * (1 - out_b / out_a); empty when the reference has no out-of-region
// components. Reports must describe the same class.
std::optional<double> fp_reduction(const FPReport& reference, const FPReport& other);

struct RankTable {
  std::vector<std::string> algorithms;
  std::vector<std::map<double, double>> rank_frequency;  // per algorithm: rank -> frequency
  std::vector<double> median_rank;
  int n_boot = 0;
  std::uint64_t seed = 0;
};

// Resamples cases with replacement n_boot times; per sample, algorithms are
// ranked by mean score (rank 1 = highest mean, ties get the average rank).
RankTable bootstrap_ranking(const Eigen::MatrixXd& per_case_scores,
                            const std::vector<std::string>& algorithm_names,
                            int n_boot = 1000, std::uint64_t seed = 0);

}  // namespace bodyreg
