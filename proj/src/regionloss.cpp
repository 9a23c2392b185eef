#include "bodyreg/regionloss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bodyreg {

double region_weight(double s, const ClassRegion& r) {
  const double lo = r.s_min();
  const double hi = r.s_max();
  if (s >= lo && s <= hi) return 0.0;
  const double d = (s < lo) ? (s - lo) / r.sigma_min : (s - hi) / r.sigma_max;
  return 1.0 - std::exp(-0.5 * d * d);
}

Eigen::ArrayXd region_weight_array(const Eigen::ArrayXd& scores, const ClassRegion& r) {
  validate_region(r);
  Eigen::ArrayXd out(scores.size());
  for (Index i = 0; i < scores.size(); ++i) out[i] = region_weight(scores[i], r);
  return out;
}

WeightField weight_field(const VolumeF& scores3d, const ClassRegion& r) {
  validate_volume(scores3d);
  validate_region(r);
  if (!scores3d.data.isFinite().all()) {
    throw ValidationError("weight field requires finite scores at every voxel");
  }
  WeightField wf;
  wf.region = r;
  wf.weights = make_volume<float>(scores3d.shape, scores3d.spacing_mm, Semantic::weights);
  for (Index i = 0; i < scores3d.data.size(); ++i) {
    wf.weights.data[i] =
        static_cast<float>(region_weight(static_cast<double>(scores3d.data[i]), r));
  }
  return wf;
}

double wbce(double yhat, double w, double eps) {
  const double yc = std::min(yhat, 1.0 - eps);
  return -w * std::log1p(-yc);
}

LossReport region_loss(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& weights,
                       double alpha, double k_percent, double eps) {
  if (yhat.size() != weights.size()) {
    throw ValidationError("prediction and weight buffers differ in length");
  }
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  if (!(k_percent > 0.0) || k_percent > 100.0) {
    throw ValidationError("k_percent must lie in (0, 100]");
  }
  if (!(eps > 0.0) || !(eps < 0.5)) throw ValidationError("eps must lie in (0, 0.5)");

  LossReport rep;
  rep.grad = Eigen::ArrayXd::Zero(yhat.size());

  std::vector<Index> invalid;
  for (Index i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) invalid.push_back(i);
  }
  rep.n_invalid = static_cast<Index>(invalid.size());
  if (invalid.empty()) return rep;

  Eigen::ArrayXd losses(rep.n_invalid);
  for (Index j = 0; j < rep.n_invalid; ++j) {
    losses[j] = wbce(yhat[invalid[static_cast<std::size_t>(j)]],
                     weights[invalid[static_cast<std::size_t>(j)]], eps);
  }

  const Index m = std::max<Index>(
      1, static_cast<Index>(std::floor(static_cast<double>(rep.n_invalid) * k_percent / 100.0)));
  rep.m_selected = m;

  // sort positions by loss descending, voxel index ascending on ties
  std::vector<Index> order(invalid.size());
  std::iota(order.begin(), order.end(), Index(0));
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (losses[a] != losses[b]) return losses[a] > losses[b];
    return invalid[static_cast<std::size_t>(a)] < invalid[static_cast<std::size_t>(b)];
  });

  double sum = 0.0;
  rep.selected_indices.reserve(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j) {
    const Index pos = order[static_cast<std::size_t>(j)];
    const Index vox = invalid[static_cast<std::size_t>(pos)];
    sum += losses[pos];
    rep.selected_indices.push_back(vox);
    const double y = yhat[vox];
    if (y < 1.0 - eps) {
      rep.grad[vox] = alpha / static_cast<double>(m) * weights[vox] / (1.0 - y);
    }
  }
  std::sort(rep.selected_indices.begin(), rep.selected_indices.end());
  rep.value = alpha / static_cast<double>(m) * sum;
  return rep;
}

LossReport region_loss(const VolumeF& yhat, const WeightField& wf, double alpha,
                       double k_percent, double eps) {
  validate_volume(yhat);
  validate_volume(wf.weights);
  if (!(yhat.shape == wf.weights.shape)) {
    throw ValidationError("prediction and weight field shapes differ");
  }
  return region_loss(yhat.data.cast<double>(), wf.weights.data.cast<double>(), alpha,
                     k_percent, eps);
}

}  // namespace bodyreg
