#include "bodyreg/scoremap.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace bodyreg {

namespace {

// L2 isotonic (non-decreasing) projection, pool-adjacent-violators.
Eigen::ArrayXd isotonic_projection(const Eigen::ArrayXd& s) {
  struct Block {
    double sum;
    Index count;
    Index start;
  };
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) {
    blocks.push_back({s[i], 1, i});
    while (blocks.size() >= 2) {
      auto& b = blocks[blocks.size() - 1];
      auto& a = blocks[blocks.size() - 2];
      if (b.sum * static_cast<double>(a.count) < a.sum * static_cast<double>(b.count)) {
        a.sum += b.sum;
        a.count += b.count;
        blocks.pop_back();
      } else {
        break;
      }
    }
  }
  Eigen::ArrayXd out(s.size());
  for (const auto& b : blocks) {
    const double value = b.sum / static_cast<double>(b.count);
    for (Index i = b.start; i < b.start + b.count; ++i) {
      out[i] = (b.count == 1) ? s[b.start] : value;  // untouched entries stay bit-identical
    }
  }
  return out;
}

}  // namespace

SliceScoreMap make_score_map(Eigen::ArrayXd scores,
                             Eigen::Array<bool, Eigen::Dynamic, 1> valid) {
  SliceScoreMap m;
  m.scores = std::move(scores);
  m.valid = std::move(valid);
  m.extrapolated = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(m.scores.size(), false);
  validate_score_map(m);
  return m;
}

void validate_score_map(const SliceScoreMap& m) {
  if (m.scores.size() == 0) throw ValidationError("score map must cover at least one slice");
  if (m.valid.size() != m.scores.size() || m.extrapolated.size() != m.scores.size()) {
    throw ValidationError("score map flag arrays must match the score array length");
  }
  for (Index z = 0; z < m.scores.size(); ++z) {
    if (m.valid[z]) {
      if (!std::isfinite(m.scores[z]) || m.scores[z] < 0.0 || m.scores[z] > 100.0) {
        std::ostringstream os;
        os << "trusted score at slice " << z << " is " << m.scores[z]
           << ", expected a finite value in [0,100]";
        throw ValidationError(os.str());
      }
    }
  }
}

SliceScoreMap extrapolate_below(const SliceScoreMap& m) {
  validate_score_map(m);
  const Index n = m.n_slices();

  std::vector<Index> valid_idx;
  for (Index z = 0; z < n; ++z) {
    if (m.valid[z]) valid_idx.push_back(z);
  }
  if (valid_idx.size() < 2) {
    throw ValidationError("extrapolation needs at least 2 valid slices, got " +
                          std::to_string(valid_idx.size()));
  }

  // least-squares line score = a + b * z over the valid set
  double zm = 0.0, sm = 0.0;
  for (Index z : valid_idx) {
    zm += static_cast<double>(z);
    sm += m.scores[z];
  }
  const double nv = static_cast<double>(valid_idx.size());
  zm /= nv;
  sm /= nv;
  double szz = 0.0, szs = 0.0;
  for (Index z : valid_idx) {
    const double dz = static_cast<double>(z) - zm;
    szz += dz * dz;
    szs += dz * (m.scores[z] - sm);
  }
  const double slope = szs / szz;
  if (!(slope > 0.0)) {
    std::ostringstream os;
    os << "fitted slice-score slope is " << slope << "; scores must increase toward the head";
    throw ValidationError(os.str());
  }
  const double intercept = sm - slope * zm;

  SliceScoreMap out = m;
  const Index lowest_valid = valid_idx.front();
  for (Index z = 0; z < lowest_valid; ++z) {
    if (!out.valid[z]) {
      out.scores[z] = intercept + slope * static_cast<double>(z);
      out.extrapolated[z] = true;
    }
  }
  return out;
}

RepairResult repair_monotonicity(const SliceScoreMap& m, double tol) {
  validate_score_map(m);
  if (!m.scores.isFinite().all()) {
    throw ValidationError("monotonicity repair requires finite scores on every slice");
  }
  if (tol < 0.0) throw ValidationError("tol must be non-negative");

  RepairResult res;
  res.map = m;
  const Index n = m.n_slices();
  if (n <= 1) return res;

  const Eigen::ArrayXd proj = isotonic_projection(m.scores);

  // maximal runs where the projection moved values
  Index i = 0;
  while (i < n) {
    if (proj[i] == m.scores[i]) {
      ++i;
      continue;
    }
    Index j = i;
    while (j + 1 < n && proj[j + 1] != m.scores[j + 1]) ++j;

    double worst = 0.0;
    for (Index k = i; k < j; ++k) {
      worst = std::max(worst, m.scores[k] - m.scores[k + 1]);
    }
    if (worst > tol) {
      for (Index k = i; k <= j; ++k) res.map.scores[k] = proj[k];
      std::ostringstream os;
      os << "repaired non-monotone slice scores on [" << i << "," << j << "] (max descent "
         << worst << ")";
      res.warnings.push_back(os.str());
    }
    i = j + 1;
  }
  return res;
}

VolumeF expand_to_volume(const SliceScoreMap& m, Shape3 shape, Spacing3 spacing_mm) {
  validate_score_map(m);
  if (m.n_slices() != shape.nz) {
    throw ValidationError("score map covers " + std::to_string(m.n_slices()) +
                          " slices but the target shape has " + std::to_string(shape.nz));
  }
  VolumeF v = make_volume<float>(shape, spacing_mm, Semantic::scores3d);
  const Index slice = shape.ny * shape.nx;
  for (Index z = 0; z < shape.nz; ++z) {
    v.data.segment(z * slice, slice).setConstant(static_cast<float>(m.scores[z]));
  }
  return v;
}

void write_scores(const SliceScoreMap& m, const std::filesystem::path& stem) {
  validate_score_map(m);
  nlohmann::json j;
  j["scores"] = std::vector<double>(m.scores.data(), m.scores.data() + m.scores.size());
  std::vector<bool> valid(static_cast<std::size_t>(m.valid.size()));
  for (Index z = 0; z < m.valid.size(); ++z) valid[static_cast<std::size_t>(z)] = m.valid[z];
  j["valid"] = valid;

  auto path = stem;
  path += ".scores.json";
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f.good()) throw IoError("write failed for " + path.string());
}

SliceScoreMap read_scores(const std::filesystem::path& stem) {
  auto path = stem;
  path += ".scores.json";
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing score file " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt score file " + path.string() + ": " + e.what());
  }

  std::vector<double> scores;
  std::vector<bool> valid;
  try {
    scores = j.at("scores").get<std::vector<double>>();
    valid = j.at("valid").get<std::vector<bool>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt score file " + path.string() + ": " + e.what());
  }
  if (scores.size() != valid.size()) {
    throw ValidationError("scores/valid length mismatch in " + path.string());
  }

  SliceScoreMap m;
  m.scores = Eigen::Map<const Eigen::ArrayXd>(scores.data(), static_cast<Index>(scores.size()));
  m.valid.resize(static_cast<Index>(valid.size()));
  for (Index z = 0; z < m.valid.size(); ++z) m.valid[z] = valid[static_cast<std::size_t>(z)];
  m.extrapolated = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(m.scores.size(), false);
  validate_score_map(m);
  return m;
}

}  // namespace bodyreg
