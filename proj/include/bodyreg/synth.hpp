#pragma once
// Deterministic whole-body and limited-FOV phantoms. A phantom is a stack of
// elliptical body cross-sections whose width varies along the body axis, an
// organ ellipsoid placed at a known score interval (with per-phantom jitter),
// and confounder tissue in the head whose intensities match the organ. The
// confounder guarantees that a model trained only on abdominal crops produces
// out-of-region foreground on wide-FOV images, which is what the regional
// penalty is meant to remove.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bodyreg/manifest.hpp"
#include "bodyreg/scoremap.hpp"
#include "bodyreg/volume.hpp"

namespace bodyreg {

struct OrganSpec {
  int class_id = 1;
  double score_lo = 33.09;  // liver-like placement
  double score_hi = 52.73;
  double intensity_mean = 2.0;
  double intensity_std = 0.15;
};

struct ConfounderSpec {
  double score_lo = 78.0;  // head interval
  double score_hi = 94.0;
  double intensity_mean = 2.0;  // matches the default organ
  double intensity_std = 0.15;
};

enum class FovMode { whole_body, abdominal, custom };

struct PhantomSpec {
  std::uint64_t seed = 0;
  Shape3 master_shape{160, 64, 64};  // whole-body grid; FOV modes crop its slices
  Spacing3 spacing_mm{2.0, 2.0, 2.0};
  std::vector<OrganSpec> organs{OrganSpec{}};
  std::vector<ConfounderSpec> confounders{ConfounderSpec{}};
  double noise_std = 0.05;
  double boundary_jitter_std = 1.5;  // score units; organ extent jitter, clamped at 3 sigma
  FovMode fov = FovMode::whole_body;
  double fov_lo = 25.0;  // used by abdominal/custom
  double fov_hi = 60.0;
};

struct Phantom {
  VolumeF image;
  std::map<int, VolumeU8> labels;
  SliceScoreMap scores;
  std::vector<std::string> warnings;
};

Phantom generate(const PhantomSpec& spec);

struct BenchmarkResult {
  Manifest manifest;
  std::filesystem::path manifest_path;
  std::vector<std::string> warnings;
};

// n_train labeled abdominal phantoms, n_support unlabeled whole-body phantoms,
// n_test whole-body phantoms with organ ground truth. Labels are written as
// <stem>_c<class>; slice scores as <stem>.scores.json.
BenchmarkResult generate_benchmark(std::uint64_t seed, int n_train, int n_support,
                                   int n_test, const std::filesystem::path& out_dir);

}  // namespace bodyreg
