#include "bodyreg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "bodyreg/rng.hpp"

namespace bodyreg {

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "baseline") return LossMode::baseline;
  if (s == "region_loss") return LossMode::region_loss;
  throw ValidationError("unknown loss mode '" + s + "'");
}

namespace {

struct PreparedCase {
  const VolumeF* image = nullptr;
  Eigen::ArrayXd slice_fraction;
};

std::array<Index, 3> dims(const VolumeF& v) {
  return {v.shape.nz, v.shape.ny, v.shape.nx};
}

std::array<Index, 3> random_corner(Rng& rng, const std::array<Index, 3>& d, Index patch) {
  std::array<Index, 3> corner;
  for (int a = 0; a < 3; ++a) {
    corner[a] = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(d[a] - patch + 1)));
  }
  return corner;
}

std::array<Index, 3> centered_corner(Index z, Index y, Index x,
                                     const std::array<Index, 3>& d, Index patch) {
  auto clampc = [&](Index v, Index dim) {
    return std::clamp<Index>(v - patch / 2, 0, dim - patch);
  };
  return {clampc(z, d[0]), clampc(y, d[1]), clampc(x, d[2])};
}

Eigen::ArrayXd patch_labels(const VolumeU8& label, const std::array<Index, 3>& corner,
                            Index patch) {
  Eigen::ArrayXd out(patch * patch * patch);
  Index row = 0;
  for (Index z = 0; z < patch; ++z)
    for (Index y = 0; y < patch; ++y)
      for (Index x = 0; x < patch; ++x, ++row) {
        out[row] = static_cast<double>(label.at(corner[0] + z, corner[1] + y, corner[2] + x));
      }
  return out;
}

Eigen::ArrayXd patch_scores(const SliceScoreMap& scores, const std::array<Index, 3>& corner,
                            Index patch) {
  Eigen::ArrayXd out(patch * patch * patch);
  Index row = 0;
  for (Index z = 0; z < patch; ++z) {
    const double s = scores.scores[corner[0] + z];
    for (Index i = 0; i < patch * patch; ++i, ++row) out[row] = s;
  }
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainCorpus& corpus) {
  if (config.epochs <= 0 || config.patches_per_epoch <= 0 || config.patch_size <= 0 ||
      config.hidden <= 0) {
    throw ValidationError("epochs, patches per epoch, patch size and hidden units must be positive");
  }
  if (config.learning_rate < 0.0) throw ValidationError("learning rate must be non-negative");
  if (corpus.labeled.empty()) throw ValidationError("training needs labeled cases");
  if (corpus.datasets.empty()) throw ValidationError("training needs dataset specs");
  const bool use_support = config.mode == LossMode::region_loss && config.p_support > 0.0;
  if (use_support && corpus.support.empty()) {
    throw ValidationError("region_loss mode with p_support > 0 needs support cases");
  }

  // class set = union of annotated classes, in ascending order
  std::set<int> class_set;
  for (const auto& ds : corpus.datasets) {
    class_set.insert(ds.annotated_classes.begin(), ds.annotated_classes.end());
  }
  if (class_set.empty()) throw ValidationError("no annotated classes in the corpus");
  const std::vector<int> class_ids(class_set.begin(), class_set.end());

  const Index patch = config.patch_size;
  for (const auto& lc : corpus.labeled) {
    const auto d = dims(lc.image);
    if (patch > d[0] || patch > d[1] || patch > d[2]) {
      throw ValidationError("patch size exceeds a labeled volume");
    }
    if (lc.dataset >= corpus.datasets.size()) {
      throw ValidationError("labeled case references an unknown dataset");
    }
  }
  for (const auto& sc : corpus.support) {
    const auto d = dims(sc.image);
    if (patch > d[0] || patch > d[1] || patch > d[2]) {
      throw ValidationError("patch size exceeds a support volume");
    }
    if (sc.scores.n_slices() != sc.image.shape.nz) {
      throw ValidationError("support case scores do not cover the image");
    }
  }

  // labeled datasets for the weighted pick; sqrt_inverse weighs by 1/sqrt(n_images)
  std::vector<double> ds_weight(corpus.datasets.size(), 0.0);
  std::vector<std::vector<std::size_t>> ds_cases(corpus.datasets.size());
  for (std::size_t i = 0; i < corpus.labeled.size(); ++i) {
    ds_cases[corpus.labeled[i].dataset].push_back(i);
  }
  for (std::size_t d = 0; d < corpus.datasets.size(); ++d) {
    if (ds_cases[d].empty()) {
      throw ValidationError("dataset '" + corpus.datasets[d].dataset_id + "' has no cases");
    }
    ds_weight[d] = config.sampling == SamplingMode::sqrt_inverse
                       ? 1.0 / std::sqrt(static_cast<double>(ds_cases[d].size()))
                       : corpus.datasets[d].sampling_weight;
  }
  double ds_weight_total = 0.0;
  for (double w : ds_weight) ds_weight_total += w;

  // per-case slice fractions, shared by patch feature extraction
  std::vector<Eigen::ArrayXd> labeled_frac, support_frac;
  for (const auto& lc : corpus.labeled) {
    labeled_frac.push_back(config.features.body_area_fraction
                               ? slice_body_fraction(lc.image, config.features.body_threshold)
                               : Eigen::ArrayXd::Zero(lc.image.shape.nz).eval());
  }
  for (const auto& sc : corpus.support) {
    support_frac.push_back(config.features.body_area_fraction
                               ? slice_body_fraction(sc.image, config.features.body_threshold)
                               : Eigen::ArrayXd::Zero(sc.image.shape.nz).eval());
  }

  // foreground voxel lists for oversampling, per labeled case per class
  std::vector<std::map<int, std::vector<Index>>> fg_voxels(corpus.labeled.size());
  for (std::size_t i = 0; i < corpus.labeled.size(); ++i) {
    for (const auto& [cid, label] : corpus.labeled[i].labels) {
      auto& list = fg_voxels[i][cid];
      for (Index v = 0; v < label.data.size(); ++v) {
        if (label.data[v] != 0) list.push_back(v);
      }
    }
  }

  TrainResult result;
  result.model = init_mlp(config.features.count(), config.hidden, class_ids,
                          derive_seed(config.seed, 0));

  Rng rng_labeled(derive_seed(config.seed, 1));
  Rng rng_support(derive_seed(config.seed, 2));

  const Index patch_voxels = patch * patch * patch;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double sup_sum = 0.0, reg_sum = 0.0;
    int sup_count = 0, reg_count = 0;

    for (int p = 0; p < config.patches_per_epoch; ++p) {
      const bool support_draw = use_support && rng_support.uniform() < config.p_support;

      Eigen::MatrixXd feats;
      std::map<int, Eigen::ArrayXd> labels;
      Eigen::ArrayXd scores;
      const DatasetSpec* spec = nullptr;
      static const DatasetSpec support_spec{"support", {}, 1.0};

      if (support_draw) {
        const std::size_t si = rng_support.uniform_index(corpus.support.size());
        const auto& sc = corpus.support[si];
        const auto d = dims(sc.image);
        const auto corner = random_corner(rng_support, d, patch);
        feats = extract_patch_features(sc.image, support_frac[si], config.features, corner,
                                       {patch, patch, patch});
        scores = patch_scores(sc.scores, corner, patch);
        spec = &support_spec;
      } else {
        // weighted dataset pick, then uniform case, then corner
        std::size_t ds = corpus.datasets.size() - 1;
        double u = rng_labeled.uniform() * ds_weight_total;
        for (std::size_t d = 0; d < ds_weight.size(); ++d) {
          u -= ds_weight[d];
          if (u < 0.0) {
            ds = d;
            break;
          }
        }
        const auto& cases = ds_cases[ds];
        const std::size_t ci = cases[rng_labeled.uniform_index(cases.size())];
        const auto& lc = corpus.labeled[ci];
        const auto d = dims(lc.image);

        std::array<Index, 3> corner;
        bool centered = false;
        if (config.oversample_foreground > 0.0 &&
            rng_labeled.uniform() < config.oversample_foreground) {
          const auto& annotated = corpus.datasets[ds].annotated_classes;
          if (!annotated.empty()) {
            const int cid = *std::next(annotated.begin(),
                                       static_cast<long>(rng_labeled.uniform_index(annotated.size())));
            const auto it = fg_voxels[ci].find(cid);
            if (it != fg_voxels[ci].end() && !it->second.empty()) {
              const Index v = it->second[rng_labeled.uniform_index(it->second.size())];
              const Index z = v / (d[1] * d[2]);
              const Index y = (v / d[2]) % d[1];
              const Index x = v % d[2];
              corner = centered_corner(z, y, x, d, patch);
              centered = true;
            }
          }
        }
        if (!centered) corner = random_corner(rng_labeled, d, patch);

        feats = extract_patch_features(lc.image, labeled_frac[ci], config.features, corner,
                                       {patch, patch, patch});
        for (const auto& [cid, label] : lc.labels) {
          labels.emplace(cid, patch_labels(label, corner, patch));
        }
        spec = &corpus.datasets[ds];
        if (class_set.size() > spec->annotated_classes.size()) {
          // partially labeled dataset: the remaining classes get the regional
          // penalty, which needs this case's slice scores
          if (!lc.scores.has_value()) {
            throw ValidationError("labeled case lacks slice scores for unannotated classes");
          }
          scores = patch_scores(*lc.scores, corner, patch);
        }
      }

      const auto acts = mlp_forward(result.model, feats);

      std::map<int, Eigen::ArrayXd> yhats;
      for (Index c = 0; c < result.model.n_classes(); ++c) {
        yhats.emplace(class_ids[static_cast<std::size_t>(c)], acts.probs.col(c).array());
      }

      const auto md = md_loss(yhats, labels, *spec, corpus.regions, scores, config.alpha,
                              config.k_percent);
      if (!std::isfinite(md.value)) {
        std::ostringstream os;
        os << "non-finite loss " << md.value << " at epoch " << epoch << ", patch " << p;
        throw ValidationError(os.str());
      }
      if (support_draw) {
        reg_sum += md.region_sum;
        ++reg_count;
      } else {
        sup_sum += md.supervised_sum;
        ++sup_count;
      }

      Eigen::MatrixXd dloss(patch_voxels, result.model.n_classes());
      for (Index c = 0; c < result.model.n_classes(); ++c) {
        dloss.col(c) = md.per_class[static_cast<std::size_t>(c)].grad.matrix();
      }
      const auto grads = mlp_backward(result.model, feats, acts, dloss);
      apply_gradient_step(result.model, grads, config.learning_rate);
    }

    const auto t1 = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    log.supervised_loss = sup_count > 0 ? sup_sum / sup_count : 0.0;
    log.region_loss = reg_count > 0 ? reg_sum / reg_count : 0.0;
    log.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    log.n_supervised_patches = sup_count;
    log.n_region_patches = reg_count;
    result.log.push_back(log);
  }
  return result;
}

VolumeF predict_volume(const MlpModel& model, const VolumeF& image,
                       const FeatureExtractor& fx, int class_id) {
  Index head = -1;
  for (std::size_t c = 0; c < model.class_ids.size(); ++c) {
    if (model.class_ids[c] == class_id) head = static_cast<Index>(c);
  }
  if (head < 0) {
    throw ValidationError("model has no head for class " + std::to_string(class_id));
  }
  const auto feats = extract_features(image, fx);
  const auto probs = mlp_probabilities(model, feats);
  VolumeF out = make_volume<float>(image.shape, image.spacing_mm, Semantic::prediction);
  out.data = probs.col(head).array().cast<float>();
  return out;
}

std::map<int, VolumeF> predict_all(const MlpModel& model, const VolumeF& image,
                                   const FeatureExtractor& fx) {
  const auto feats = extract_features(image, fx);
  const auto probs = mlp_probabilities(model, feats);
  std::map<int, VolumeF> out;
  for (std::size_t c = 0; c < model.class_ids.size(); ++c) {
    VolumeF v = make_volume<float>(image.shape, image.spacing_mm, Semantic::prediction);
    v.data = probs.col(static_cast<Index>(c)).array().cast<float>();
    out.emplace(model.class_ids[c], std::move(v));
  }
  return out;
}

VolumeU8 threshold_mask(const VolumeF& probabilities, double threshold) {
  validate_volume(probabilities);
  VolumeU8 mask = make_volume<std::uint8_t>(probabilities.shape, probabilities.spacing_mm,
                                            Semantic::prediction);
  mask.data = (probabilities.data > static_cast<float>(threshold)).cast<std::uint8_t>();
  return mask;
}

}  // namespace bodyreg
