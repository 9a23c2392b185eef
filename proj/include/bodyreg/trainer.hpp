#pragma once
// Desk-scale training loop: cubic patches, a per-voxel MLP over handcrafted
// features, plain gradient descent. Labeled patches contribute the supervised
// loss; in region_loss mode, unlabeled support patches (drawn with probability
// p_support) contribute the regional penalty through shared parameters.
// Labeled and support draws come from two independent generators so a baseline
// run and a region_loss run with the same seed see identical labeled patches.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "bodyreg/composeloss.hpp"
#include "bodyreg/features.hpp"
#include "bodyreg/mlp.hpp"
#include "bodyreg/scoremap.hpp"

namespace bodyreg {

enum class LossMode { baseline, region_loss };
enum class SamplingMode { uniform, sqrt_inverse };

LossMode loss_mode_from_string(const std::string& s);

struct TrainConfig {
  std::uint64_t seed = 0;
  int epochs = 1;
  Index patch_size = 16;  // cubic
  int patches_per_epoch = 32;
  double learning_rate = 0.1;
  double alpha = 10.0;      // regional penalty weight
  double k_percent = 1.0;   // top-k percentage
  double p_support = 0.2;   // probability of drawing a support patch
  double oversample_foreground = 0.33;
  Index hidden = 16;
  LossMode mode = LossMode::region_loss;
  SamplingMode sampling = SamplingMode::uniform;
  FeatureExtractor features;
};

struct LabeledCase {
  VolumeF image;
  std::map<int, VolumeU8> labels;
  std::size_t dataset = 0;               // index into TrainCorpus::datasets
  std::optional<SliceScoreMap> scores;   // required when other datasets annotate more classes
};

struct SupportCase {
  VolumeF image;
  SliceScoreMap scores;
};

struct TrainCorpus {
  std::vector<DatasetSpec> datasets;  // labeled datasets only
  std::vector<LabeledCase> labeled;
  std::vector<SupportCase> support;
  RegionConfig regions;
};

struct EpochLog {
  int epoch = 0;
  double supervised_loss = 0.0;  // mean over the epoch's labeled patches
  double region_loss = 0.0;      // mean over the epoch's support patches
  double wall_time_ms = 0.0;
  int n_supervised_patches = 0;
  int n_region_patches = 0;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLog> log;
};

TrainResult train(const TrainConfig& config, const TrainCorpus& corpus);

// Voxelwise forward pass over a whole image; probabilities for one class head.
VolumeF predict_volume(const MlpModel& model, const VolumeF& image,
                       const FeatureExtractor& fx, int class_id);

std::map<int, VolumeF> predict_all(const MlpModel& model, const VolumeF& image,
                                   const FeatureExtractor& fx);

VolumeU8 threshold_mask(const VolumeF& probabilities, double threshold = 0.5);

}  // namespace bodyreg
