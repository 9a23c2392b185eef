#include "bodyreg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bodyreg/rng.hpp"
#include "bodyreg/volume_io.hpp"

namespace bodyreg {

namespace {

double clamp3(double g) { return std::clamp(g, -3.0, 3.0); }

// body half-width as a fraction of the available radius, by slice score;
// wide torso, narrow neck, medium head
double body_width_fraction(double s) {
  static const std::vector<std::pair<double, double>> table = {
      {-60.0, 0.42}, {-20.0, 0.46}, {0.0, 0.55},  {12.0, 0.70}, {25.0, 0.80},
      {40.0, 0.85},  {55.0, 0.83},  {62.0, 0.80}, {68.0, 0.92}, {73.0, 0.45},
      {78.0, 0.58},  {86.0, 0.62},  {94.0, 0.58}, {100.0, 0.50}, {140.0, 0.45}};
  if (s <= table.front().first) return table.front().second;
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (s <= table[i].first) {
      const auto [s0, w0] = table[i - 1];
      const auto [s1, w1] = table[i];
      return w0 + (w1 - w0) * (s - s0) / (s1 - s0);
    }
  }
  return table.back().second;
}

struct Ellipsoid {
  double cz = 0, sz = 1;  // master z coordinates
  double cy = 0, sy = 1;
  double cx = 0, sx = 1;

  bool contains(double z, double y, double x) const {
    const double a = (z - cz) / sz, b = (y - cy) / sy, c = (x - cx) / sx;
    return a * a + b * b + c * c <= 1.0;
  }
};

}  // namespace

Phantom generate(const PhantomSpec& spec) {
  const auto& ms = spec.master_shape;
  if (ms.nz < 2 || ms.ny < 8 || ms.nx < 8) {
    throw ValidationError("master shape too small for a phantom");
  }
  if (spec.noise_std < 0.0 || spec.boundary_jitter_std < 0.0) {
    throw ValidationError("noise and jitter deviations must be non-negative");
  }
  for (const auto& o : spec.organs) {
    if (o.score_lo < 0.0 || o.score_hi > 100.0 || o.score_lo >= o.score_hi) {
      throw ValidationError("organ score interval must be a subinterval of [0,100]");
    }
  }

  const double z_per_score = static_cast<double>(ms.nz - 1) / 100.0;
  auto z_of = [&](double s) { return s * z_per_score; };
  auto s_of = [&](double z) { return z / z_per_score; };

  Index z0 = 0, z1 = ms.nz - 1;
  if (spec.fov != FovMode::whole_body) {
    if (!(spec.fov_lo < spec.fov_hi)) throw ValidationError("FOV interval must be non-empty");
    z0 = static_cast<Index>(std::ceil(z_of(spec.fov_lo)));
    z1 = static_cast<Index>(std::floor(z_of(spec.fov_hi)));
    if (z1 - z0 < 1) throw ValidationError("FOV interval covers fewer than 2 slices");
  }

  Rng rng(spec.seed);

  const double avail = static_cast<double>(std::min(ms.ny, ms.nx)) / 2.0 - 2.0;
  const double cy0 = static_cast<double>(ms.ny - 1) / 2.0;
  const double cx0 = static_cast<double>(ms.nx - 1) / 2.0;
  const double body_wy = 1.0 + 0.03 * clamp3(rng.normal());
  const double body_wx = 1.0 + 0.03 * clamp3(rng.normal());

  std::vector<Ellipsoid> organ_shapes;
  for (const auto& o : spec.organs) {
    const double lo = o.score_lo + spec.boundary_jitter_std * clamp3(rng.normal());
    double hi = o.score_hi + spec.boundary_jitter_std * clamp3(rng.normal());
    if (hi < lo + 1.0) hi = lo + 1.0;
    Ellipsoid e;
    e.cz = z_of(0.5 * (lo + hi));
    e.sz = 0.5 * (z_of(hi) - z_of(lo));
    const double scale = 1.0 + 0.05 * clamp3(rng.normal());
    e.sy = e.sx = 0.42 * avail * scale;
    e.cy = cy0 + 0.7 * clamp3(rng.normal());
    e.cx = cx0 + 0.7 * clamp3(rng.normal());
    organ_shapes.push_back(e);
  }

  std::vector<Ellipsoid> confounder_shapes;
  for (const auto& c : spec.confounders) {
    const double lo = c.score_lo + 0.5 * clamp3(rng.normal());
    const double hi = c.score_hi + 0.5 * clamp3(rng.normal());
    Ellipsoid e;
    e.cz = z_of(0.5 * (lo + hi));
    e.sz = 0.5 * (z_of(hi) - z_of(lo));
    const double scale = 1.0 + 0.03 * clamp3(rng.normal());
    e.sy = e.sx = 0.48 * avail * scale;
    e.cy = cy0 + 0.5 * clamp3(rng.normal());
    e.cx = cx0 + 0.5 * clamp3(rng.normal());
    confounder_shapes.push_back(e);
  }

  Phantom out;
  const Shape3 shape{z1 - z0 + 1, ms.ny, ms.nx};
  out.image = make_volume<float>(shape, spec.spacing_mm, Semantic::image);
  for (const auto& o : spec.organs) {
    out.labels.emplace(o.class_id,
                       make_volume<std::uint8_t>(shape, spec.spacing_mm, Semantic::label));
  }

  Eigen::ArrayXd scores(shape.nz);
  Eigen::Array<bool, Eigen::Dynamic, 1> valid(shape.nz);
  for (Index k = 0; k < shape.nz; ++k) {
    const double s = s_of(static_cast<double>(z0 + k));
    scores[k] = s;
    valid[k] = s >= 0.0 && s <= 100.0;
  }

  Index row = 0;
  for (Index k = 0; k < shape.nz; ++k) {
    const double zm = static_cast<double>(z0 + k);
    const double s = scores[k];
    const double frac = body_width_fraction(s);
    const double ay = frac * avail * body_wy;
    const double ax = frac * avail * body_wx;
    for (Index y = 0; y < shape.ny; ++y) {
      for (Index x = 0; x < shape.nx; ++x, ++row) {
        const double ry = (static_cast<double>(y) - cy0) / ay;
        const double rx = (static_cast<double>(x) - cx0) / ax;
        const bool in_body = ry * ry + rx * rx <= 1.0;
        double value = in_body ? 1.0 : 0.0;

        bool organ_voxel = false;
        for (std::size_t i = 0; i < organ_shapes.size(); ++i) {
          if (organ_shapes[i].contains(zm, static_cast<double>(y), static_cast<double>(x))) {
            value = rng.normal(spec.organs[i].intensity_mean, spec.organs[i].intensity_std);
            out.labels.at(spec.organs[i].class_id).data[row] = 1;
            organ_voxel = true;
            break;
          }
        }
        if (!organ_voxel) {
          for (std::size_t i = 0; i < confounder_shapes.size(); ++i) {
            if (confounder_shapes[i].contains(zm, static_cast<double>(y),
                                              static_cast<double>(x))) {
              value = rng.normal(spec.confounders[i].intensity_mean,
                                 spec.confounders[i].intensity_std);
              break;
            }
          }
        }
        out.image.data[row] = static_cast<float>(value + spec.noise_std * rng.normal());
      }
    }
  }

  for (const auto& o : spec.organs) {
    if ((out.labels.at(o.class_id).data != 0).count() == 0) {
      std::ostringstream os;
      os << "organ class " << o.class_id << " lies outside the field of view; label is empty";
      out.warnings.push_back(os.str());
    }
  }

  out.scores = make_score_map(std::move(scores), std::move(valid));
  return out;
}

BenchmarkResult generate_benchmark(std::uint64_t seed, int n_train, int n_support,
                                   int n_test, const std::filesystem::path& out_dir) {
  if (n_train < 1 || n_support < 0 || n_test < 1) {
    throw ValidationError("benchmark needs at least one training and one test phantom");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory " + out_dir.string());
  }

  BenchmarkResult res;

  auto emit = [&](const std::string& stem, const PhantomSpec& spec, bool with_labels) {
    Phantom ph = generate(spec);
    const auto base = out_dir / stem;
    write_volume(ph.image, base);
    if (with_labels) {
      for (const auto& [cid, label] : ph.labels) {
        write_volume(label, out_dir / (stem + "_c" + std::to_string(cid)));
      }
    }
    write_scores(ph.scores, base);
    for (auto& w : ph.warnings) res.warnings.push_back(stem + ": " + std::move(w));
    return stem;
  };

  auto stem_name = [](const char* role, int i) {
    std::ostringstream os;
    os << role << "_" << (i < 10 ? "00" : i < 100 ? "0" : "") << i;
    return os.str();
  };

  for (int i = 0; i < n_train; ++i) {
    PhantomSpec spec;
    spec.seed = derive_seed(seed, 1, static_cast<std::uint64_t>(i));
    spec.fov = FovMode::abdominal;
    res.manifest.train.push_back(emit(stem_name("train", i), spec, true));
  }
  for (int i = 0; i < n_support; ++i) {
    PhantomSpec spec;
    spec.seed = derive_seed(seed, 2, static_cast<std::uint64_t>(i));
    spec.fov = FovMode::whole_body;
    res.manifest.support.push_back(emit(stem_name("support", i), spec, false));
  }
  for (int i = 0; i < n_test; ++i) {
    PhantomSpec spec;
    spec.seed = derive_seed(seed, 3, static_cast<std::uint64_t>(i));
    spec.fov = FovMode::whole_body;
    res.manifest.test.push_back(emit(stem_name("test", i), spec, true));
  }

  res.manifest_path = out_dir / "manifest.json";
  write_manifest(res.manifest, res.manifest_path);
  return res;
}

}  // namespace bodyreg
