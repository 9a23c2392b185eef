#include "bodyreg/composeloss.hpp"

#include <algorithm>
#include <cmath>

#include "bodyreg/rng.hpp"

namespace bodyreg {

SupervisedLoss supervised_loss(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& y,
                               double eps) {
  if (yhat.size() != y.size()) {
    throw ValidationError("prediction and label buffers differ in length");
  }
  if (yhat.size() == 0) throw ValidationError("supervised loss needs at least one voxel");
  if (((y != 0.0) && (y != 1.0)).any()) {
    throw ValidationError("labels must be binary");
  }
  if (!(eps > 0.0) || !(eps < 0.5)) throw ValidationError("eps must lie in (0, 0.5)");

  const double n = static_cast<double>(yhat.size());
  SupervisedLoss out;
  out.grad = Eigen::ArrayXd::Zero(yhat.size());

  double bce = 0.0;
  for (Index i = 0; i < yhat.size(); ++i) {
    const double yc = std::clamp(yhat[i], eps, 1.0 - eps);
    bce += -(y[i] * std::log(yc) + (1.0 - y[i]) * std::log1p(-yc));
    if (yhat[i] > eps && yhat[i] < 1.0 - eps) {
      out.grad[i] = (-y[i] / yc + (1.0 - y[i]) / (1.0 - yc)) / n;
    }
  }
  out.bce = bce / n;

  const double sx = yhat.sum();
  const double sy = y.sum();
  const double sxy = (yhat * y).sum();
  if (sx + sy > 0.0) {
    const double denom = sx + sy + kSoftDiceEps;
    out.dice_term = 1.0 - 2.0 * sxy / denom;
    out.grad += (2.0 * sxy - 2.0 * y * denom) / (denom * denom);
  }
  out.value = out.bce + out.dice_term;
  return out;
}

MdLoss md_loss(const std::map<int, Eigen::ArrayXd>& yhats,
               const std::map<int, Eigen::ArrayXd>& labels, const DatasetSpec& spec,
               const RegionConfig& regions, const Eigen::ArrayXd& scores, double alpha,
               double k_percent, double eps) {
  if (yhats.empty()) throw ValidationError("md_loss needs at least one predicted class");

  const Index n = yhats.begin()->second.size();
  for (const auto& [id, yh] : yhats) {
    if (yh.size() != n) {
      throw ValidationError("prediction buffers must share one voxel count");
    }
  }
  for (int c : spec.annotated_classes) {
    if (!yhats.count(c)) {
      throw ValidationError("missing prediction channel for annotated class " +
                            std::to_string(c));
    }
    if (!labels.count(c)) {
      throw ValidationError("missing label for annotated class " + std::to_string(c));
    }
  }
  for (const auto& [id, lab] : labels) {
    if (!spec.annotated_classes.count(id)) {
      throw ValidationError("label provided for class " + std::to_string(id) +
                            " that dataset '" + spec.dataset_id + "' does not annotate");
    }
    if (lab.size() != n) throw ValidationError("label buffer length mismatch");
  }

  bool any_region = false;
  for (const auto& [id, yh] : yhats) {
    if (!spec.annotated_classes.count(id)) any_region = true;
  }
  if (any_region && scores.size() != n) {
    throw ValidationError("per-voxel scores are required when unannotated classes exist");
  }

  MdLoss out;
  for (const auto& [id, yh] : yhats) {
    ClassLoss cl;
    cl.class_id = id;
    if (spec.annotated_classes.count(id)) {
      auto sup = supervised_loss(yh, labels.at(id), eps);
      cl.supervised = true;
      cl.value = sup.value;
      cl.grad = std::move(sup.grad);
      out.supervised_sum += cl.value;
    } else {
      const auto w = region_weight_array(scores, regions.at(id));
      auto rl = region_loss(yh, w, alpha, k_percent, eps);
      cl.supervised = false;
      cl.value = rl.value;
      cl.grad = rl.grad;
      cl.region = std::move(rl);
      out.region_sum += cl.value;
    }
    out.per_class.push_back(std::move(cl));
  }
  out.value = out.supervised_sum + out.region_sum;
  return out;
}

std::vector<std::size_t> sample_batch(const std::vector<DatasetSpec>& datasets,
                                      double p_support, std::uint64_t seed,
                                      std::size_t n_draws) {
  if (datasets.empty()) throw ValidationError("sample_batch needs at least one dataset");
  if (p_support < 0.0 || p_support > 1.0) {
    throw ValidationError("p_support must lie in [0,1]");
  }

  std::vector<std::size_t> support_pool, labeled_pool;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    if (datasets[i].sampling_weight <= 0.0) {
      throw ValidationError("dataset sampling weights must be positive");
    }
    (datasets[i].is_support() ? support_pool : labeled_pool).push_back(i);
  }
  if (p_support > 0.0 && support_pool.empty()) {
    throw ValidationError("p_support > 0 but no support dataset is present");
  }
  if (p_support < 1.0 && labeled_pool.empty()) {
    throw ValidationError("p_support < 1 but no labeled dataset is present");
  }

  auto pick_weighted = [&](const std::vector<std::size_t>& pool, Rng& rng) {
    double total = 0.0;
    for (std::size_t i : pool) total += datasets[i].sampling_weight;
    double u = rng.uniform() * total;
    for (std::size_t i : pool) {
      u -= datasets[i].sampling_weight;
      if (u < 0.0) return i;
    }
    return pool.back();
  };

  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(n_draws);
  for (std::size_t d = 0; d < n_draws; ++d) {
    const bool support = rng.uniform() < p_support;
    out.push_back(pick_weighted(support ? support_pool : labeled_pool, rng));
  }
  return out;
}

}  // namespace bodyreg
