#pragma once
// Per-axial-slice anatomical scores (pelvis start = 0, head = 100), with
// below-pelvis extrapolation, isotonic repair of non-monotone runs, and
// expansion to a voxel-aligned 3D score array.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bodyreg/volume.hpp"

namespace bodyreg {

struct SliceScoreMap {
  Eigen::ArrayXd scores;                         // one score per axial slice
  Eigen::Array<bool, Eigen::Dynamic, 1> valid;   // true where the score is trusted
  Eigen::Array<bool, Eigen::Dynamic, 1> extrapolated;

  Index n_slices() const { return scores.size(); }
};

SliceScoreMap make_score_map(Eigen::ArrayXd scores,
                             Eigen::Array<bool, Eigen::Dynamic, 1> valid);

// Throws ValidationError when lengths differ or a trusted score is outside [0,100].
void validate_score_map(const SliceScoreMap& m);

// Least-squares line over all valid (slice, score) pairs; fills every invalid
// slice below the lowest valid one and marks it extrapolated. Valid slices are
// never touched. Errors: fewer than 2 valid slices, or a fitted slope <= 0.
SliceScoreMap extrapolate_below(const SliceScoreMap& m);

struct RepairResult {
  SliceScoreMap map;
  std::vector<std::string> warnings;  // one per repaired run
};

// Replaces scores by their non-decreasing least-squares projection on every
// run whose internal descent exceeds tol; runs with only sub-tol wobble are
// left alone.
RepairResult repair_monotonicity(const SliceScoreMap& m, double tol = 0.5);

// Broadcasts scores[z] to every voxel of slice z.
VolumeF expand_to_volume(const SliceScoreMap& m, Shape3 shape, Spacing3 spacing_mm);

// <stem>.scores.json: {"scores":[...],"valid":[...]}
void write_scores(const SliceScoreMap& m, const std::filesystem::path& stem);
SliceScoreMap read_scores(const std::filesystem::path& stem);

}  // namespace bodyreg
