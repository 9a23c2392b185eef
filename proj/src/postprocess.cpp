#include "bodyreg/postprocess.hpp"

#include <algorithm>
#include <deque>

#include "bodyreg/evaluate.hpp"

namespace bodyreg {

Connectivity connectivity_from_int(int c) {
  if (c == 6) return Connectivity::six;
  if (c == 26) return Connectivity::twenty_six;
  throw ValidationError("connectivity must be 6 or 26");
}

namespace {

std::vector<std::array<Index, 3>> neighbor_offsets(Connectivity c) {
  std::vector<std::array<Index, 3>> out;
  for (Index dz = -1; dz <= 1; ++dz)
    for (Index dy = -1; dy <= 1; ++dy)
      for (Index dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && dy == 0 && dx == 0) continue;
        const int manhattan = int(dz != 0) + int(dy != 0) + int(dx != 0);
        if (c == Connectivity::six && manhattan != 1) continue;
        out.push_back({dz, dy, dx});
      }
  return out;
}

}  // namespace

ComponentSet connected_components(const VolumeU8& mask, Connectivity connectivity) {
  validate_volume(mask);
  if ((mask.data > 1).any()) throw ValidationError("connected components need a binary mask");

  ComponentSet cs;
  cs.shape = mask.shape;
  cs.spacing_mm = mask.spacing_mm;
  cs.connectivity = connectivity;
  cs.labels = Eigen::Array<std::uint32_t, Eigen::Dynamic, 1>::Zero(mask.data.size());

  const auto offsets = neighbor_offsets(connectivity);
  const auto& sh = mask.shape;
  std::deque<Index> queue;
  std::uint32_t next_id = 0;

  for (Index start = 0; start < mask.data.size(); ++start) {
    if (mask.data[start] == 0 || cs.labels[start] != 0) continue;
    ++next_id;
    Index count = 0;
    cs.labels[start] = next_id;
    queue.push_back(start);
    while (!queue.empty()) {
      const Index v = queue.front();
      queue.pop_front();
      ++count;
      const Index z = v / (sh.ny * sh.nx);
      const Index y = (v / sh.nx) % sh.ny;
      const Index x = v % sh.nx;
      for (const auto& o : offsets) {
        const Index nz = z + o[0], ny = y + o[1], nx = x + o[2];
        if (nz < 0 || nz >= sh.nz || ny < 0 || ny >= sh.ny || nx < 0 || nx >= sh.nx) continue;
        const Index nv = (nz * sh.ny + ny) * sh.nx + nx;
        if (mask.data[nv] != 0 && cs.labels[nv] == 0) {
          cs.labels[nv] = next_id;
          queue.push_back(nv);
        }
      }
    }
    cs.voxel_counts.push_back(count);
  }
  return cs;
}

VolumeU8 largest_component_filter(const VolumeU8& mask, Connectivity connectivity) {
  const auto cs = connected_components(mask, connectivity);
  VolumeU8 out = make_volume<std::uint8_t>(mask.shape, mask.spacing_mm, mask.semantic);
  if (cs.count() == 0) return out;

  std::size_t best = 0;
  for (std::size_t i = 1; i < cs.count(); ++i) {
    if (cs.voxel_counts[i] > cs.voxel_counts[best]) best = i;  // ties keep the lower id
  }
  const auto keep = static_cast<std::uint32_t>(best + 1);
  out.data = (cs.labels == keep).cast<std::uint8_t>();
  return out;
}

VolumeU8 bpr_crop(const VolumeU8& pred, const VolumeF& scores3d, const ClassRegion& region,
                  double margin_sigma) {
  validate_volume(pred);
  validate_volume(scores3d);
  validate_region(region);
  if (!(pred.shape == scores3d.shape)) {
    throw ValidationError("prediction and score volume shapes differ");
  }
  if (margin_sigma < 0.0) throw ValidationError("crop margin must be non-negative");

  const double lo = region.s_min() - margin_sigma * region.sigma_min;
  const double hi = region.s_max() + margin_sigma * region.sigma_max;
  VolumeU8 out = pred;
  for (Index i = 0; i < pred.data.size(); ++i) {
    const double s = static_cast<double>(scores3d.data[i]);
    if (s < lo || s > hi) out.data[i] = 0;
  }
  return out;
}

double tune_crop_margin(const std::vector<CropTuneCase>& cases, const ClassRegion& region,
                        const std::vector<double>& margins) {
  if (margins.empty()) throw ValidationError("margin tuning needs at least one candidate");
  if (cases.empty()) throw ValidationError("margin tuning needs validation cases");

  double best_margin = margins.front();
  double best_dice = -1.0;
  for (double m : margins) {
    double sum = 0.0;
    for (const auto& c : cases) {
      sum += dice(bpr_crop(c.pred, c.scores3d, region, m), c.ground_truth);
    }
    const double mean = sum / static_cast<double>(cases.size());
    if (mean > best_dice || (mean == best_dice && m > best_margin)) {
      best_dice = mean;
      best_margin = m;
    }
  }
  return best_margin;
}

}  // namespace bodyreg
