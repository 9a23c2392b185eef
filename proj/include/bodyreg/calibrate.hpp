#pragma once
// Per-class valid score intervals. The interval endpoints come from the
// distribution of per-image foreground score extremes: S_min = mu_min -
// offset_n * sigma_min and S_max = mu_max + offset_n * sigma_max, with the
// same sigmas reused as the smoothing widths of the boundary weighting.

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bodyreg/scoremap.hpp"
#include "bodyreg/volume.hpp"

namespace bodyreg {

inline constexpr double kDefaultSigmaFloor = 0.5;  // score units

struct ClassRegion {
  int class_id = 0;
  double mu_min = 0.0;
  double sigma_min = kDefaultSigmaFloor;
  double mu_max = 0.0;
  double sigma_max = kDefaultSigmaFloor;
  double offset_n = 0.0;  // non-negative sigma multiplier widening the interval

  double s_min() const { return mu_min - offset_n * sigma_min; }
  double s_max() const { return mu_max + offset_n * sigma_max; }
};

void validate_region(const ClassRegion& r);

struct RegionConfig {
  std::map<int, ClassRegion> classes;
  std::string provenance;

  const ClassRegion& at(int class_id) const;
};

struct ExtremesResult {
  std::vector<double> mins;  // per contributing image: lowest foreground slice score
  std::vector<double> maxs;  // per contributing image: highest foreground slice score
  std::vector<std::string> warnings;
};

// Per image, the min/max slice score over slices containing foreground of the
// class. Images without foreground are skipped with a warning; zero
// contributing images is an error.
ExtremesResult collect_extremes(
    const std::vector<std::pair<const VolumeU8*, const SliceScoreMap*>>& labeled,
    int class_id);

// mu/sigma are mean and sample (n-1) standard deviation; sigmas below
// sigma_floor are raised to it, and a single observation gets sigma_floor.
ClassRegion fit_region(const std::vector<double>& mins, const std::vector<double>& maxs,
                       int class_id, double offset_n,
                       double sigma_floor = kDefaultSigmaFloor);

struct SweepRow {
  double offset = 0.0;
  double mean_dice = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double best_offset = 0.0;  // max mean Dice, ties toward the smaller offset
};

// Default grid of boundary offsets: 0..3 in half steps, then 4, 5, 6.
std::vector<double> default_offset_grid();

// evaluator maps an offset to a mean validation Dice.
SweepResult sweep_offsets(const std::vector<double>& offsets,
                          const std::function<double(double)>& evaluator);

// regions.json
void write_regions(const RegionConfig& config, const std::filesystem::path& path);
RegionConfig read_regions(const std::filesystem::path& path);

}  // namespace bodyreg
