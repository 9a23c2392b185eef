#include "bodyreg/features.hpp"

#include <array>
#include <cmath>

namespace bodyreg {

namespace {

// Box sums over the in-bounds window [p-r, p+r] per axis, via a summed-area
// table of the requested subregion padded by r (clipped at volume bounds).
struct BoxStats {
  Eigen::ArrayXd mean;   // per output voxel
  Eigen::ArrayXd meansq;
  Eigen::ArrayXd count;
};

BoxStats box_stats(const VolumeF& image, const std::array<Index, 3>& corner,
                   const std::array<Index, 3>& size, Index r) {
  const auto& sh = image.shape;
  const std::array<Index, 3> lo{std::max<Index>(0, corner[0] - r),
                                std::max<Index>(0, corner[1] - r),
                                std::max<Index>(0, corner[2] - r)};
  const std::array<Index, 3> hi{std::min(sh.nz, corner[0] + size[0] + r),
                                std::min(sh.ny, corner[1] + size[1] + r),
                                std::min(sh.nx, corner[2] + size[2] + r)};
  const Index mz = hi[0] - lo[0], my = hi[1] - lo[1], mx = hi[2] - lo[2];

  // sat[(z, y, x)] = sum over [0..z) x [0..y) x [0..x) of the padded region
  const Index pz = mz + 1, py = my + 1, px = mx + 1;
  Eigen::ArrayXd sat = Eigen::ArrayXd::Zero(pz * py * px);
  Eigen::ArrayXd satsq = Eigen::ArrayXd::Zero(pz * py * px);
  auto sat_idx = [&](Index z, Index y, Index x) { return (z * py + y) * px + x; };
  for (Index z = 1; z < pz; ++z)
    for (Index y = 1; y < py; ++y)
      for (Index x = 1; x < px; ++x) {
        const double v =
            static_cast<double>(image.at(lo[0] + z - 1, lo[1] + y - 1, lo[2] + x - 1));
        const double base = sat[sat_idx(z - 1, y, x)] + sat[sat_idx(z, y - 1, x)] +
                            sat[sat_idx(z, y, x - 1)] - sat[sat_idx(z - 1, y - 1, x)] -
                            sat[sat_idx(z - 1, y, x - 1)] - sat[sat_idx(z, y - 1, x - 1)] +
                            sat[sat_idx(z - 1, y - 1, x - 1)];
        const double basesq = satsq[sat_idx(z - 1, y, x)] + satsq[sat_idx(z, y - 1, x)] +
                              satsq[sat_idx(z, y, x - 1)] - satsq[sat_idx(z - 1, y - 1, x)] -
                              satsq[sat_idx(z - 1, y, x - 1)] -
                              satsq[sat_idx(z, y - 1, x - 1)] +
                              satsq[sat_idx(z - 1, y - 1, x - 1)];
        sat[sat_idx(z, y, x)] = base + v;
        satsq[sat_idx(z, y, x)] = basesq + v * v;
      }

  auto box_sum = [&](const Eigen::ArrayXd& s, Index z0, Index y0, Index x0, Index z1,
                     Index y1, Index x1) {
    return s[sat_idx(z1, y1, x1)] - s[sat_idx(z0, y1, x1)] - s[sat_idx(z1, y0, x1)] -
           s[sat_idx(z1, y1, x0)] + s[sat_idx(z0, y0, x1)] + s[sat_idx(z0, y1, x0)] +
           s[sat_idx(z1, y0, x0)] - s[sat_idx(z0, y0, x0)];
  };

  const Index n = size[0] * size[1] * size[2];
  BoxStats out;
  out.mean.resize(n);
  out.meansq.resize(n);
  out.count.resize(n);
  Index row = 0;
  for (Index z = 0; z < size[0]; ++z)
    for (Index y = 0; y < size[1]; ++y)
      for (Index x = 0; x < size[2]; ++x, ++row) {
        const Index gz = corner[0] + z, gy = corner[1] + y, gx = corner[2] + x;
        const Index z0 = std::max<Index>(0, gz - r) - lo[0];
        const Index y0 = std::max<Index>(0, gy - r) - lo[1];
        const Index x0 = std::max<Index>(0, gx - r) - lo[2];
        const Index z1 = std::min(sh.nz, gz + r + 1) - lo[0];
        const Index y1 = std::min(sh.ny, gy + r + 1) - lo[1];
        const Index x1 = std::min(sh.nx, gx + r + 1) - lo[2];
        const double cnt = static_cast<double>((z1 - z0) * (y1 - y0) * (x1 - x0));
        out.count[row] = cnt;
        out.mean[row] = box_sum(sat, z0, y0, x0, z1, y1, x1) / cnt;
        out.meansq[row] = box_sum(satsq, z0, y0, x0, z1, y1, x1) / cnt;
      }
  return out;
}

}  // namespace

std::vector<std::string> FeatureExtractor::names() const {
  std::vector<std::string> out;
  if (intensity) out.push_back("intensity");
  if (box_mean_r1) out.push_back("box_mean_r1");
  if (box_mean_r2) out.push_back("box_mean_r2");
  if (box_std_r2) out.push_back("box_std_r2");
  if (body_area_fraction) out.push_back("body_area_fraction");
  return out;
}

Eigen::ArrayXd slice_body_fraction(const VolumeF& image, double body_threshold) {
  validate_volume(image);
  const Index slice = image.shape.ny * image.shape.nx;
  Eigen::ArrayXd out(image.shape.nz);
  for (Index z = 0; z < image.shape.nz; ++z) {
    const Index above =
        (image.data.segment(z * slice, slice) > static_cast<float>(body_threshold)).count();
    out[z] = static_cast<double>(above) / static_cast<double>(slice);
  }
  return out;
}

Eigen::MatrixXd extract_patch_features(const VolumeF& image,
                                       const Eigen::ArrayXd& slice_fraction,
                                       const FeatureExtractor& fx,
                                       const std::array<Index, 3>& corner,
                                       const std::array<Index, 3>& size) {
  if (fx.count() == 0) throw ValidationError("feature config selects no features");
  const auto& sh = image.shape;
  for (int a = 0; a < 3; ++a) {
    const Index dim = (a == 0 ? sh.nz : a == 1 ? sh.ny : sh.nx);
    if (corner[a] < 0 || size[a] <= 0 || corner[a] + size[a] > dim) {
      throw ValidationError("feature patch outside the image");
    }
  }
  if (slice_fraction.size() != sh.nz) {
    throw ValidationError("slice fraction array must cover every slice");
  }

  const Index n = size[0] * size[1] * size[2];
  Eigen::MatrixXd feats(n, fx.count());
  int col = 0;

  if (fx.intensity) {
    Index row = 0;
    for (Index z = 0; z < size[0]; ++z)
      for (Index y = 0; y < size[1]; ++y)
        for (Index x = 0; x < size[2]; ++x, ++row) {
          feats(row, col) =
              static_cast<double>(image.at(corner[0] + z, corner[1] + y, corner[2] + x));
        }
    ++col;
  }
  if (fx.box_mean_r1) {
    feats.col(col++) = box_stats(image, corner, size, 1).mean.matrix();
  }
  if (fx.box_mean_r2 || fx.box_std_r2) {
    const auto bs = box_stats(image, corner, size, 2);
    if (fx.box_mean_r2) feats.col(col++) = bs.mean.matrix();
    if (fx.box_std_r2) {
      feats.col(col++) = (bs.meansq - bs.mean.square()).max(0.0).sqrt().matrix();
    }
  }
  if (fx.body_area_fraction) {
    Index row = 0;
    for (Index z = 0; z < size[0]; ++z) {
      const double f = slice_fraction[corner[0] + z];
      for (Index i = 0; i < size[1] * size[2]; ++i, ++row) feats(row, col) = f;
    }
    ++col;
  }
  return feats;
}

Eigen::MatrixXd extract_features(const VolumeF& image, const FeatureExtractor& fx) {
  validate_volume(image);
  const auto frac = fx.body_area_fraction
                        ? slice_body_fraction(image, fx.body_threshold)
                        : Eigen::ArrayXd::Zero(image.shape.nz).eval();
  return extract_patch_features(image, frac, fx, {0, 0, 0},
                                {image.shape.nz, image.shape.ny, image.shape.nx});
}

}  // namespace bodyreg
