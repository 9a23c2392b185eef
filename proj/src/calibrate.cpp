#include "bodyreg/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace bodyreg {

void validate_region(const ClassRegion& r) {
  if (!(r.sigma_min > 0.0) || !(r.sigma_max > 0.0)) {
    throw ValidationError("region sigmas must be positive");
  }
  if (r.offset_n < 0.0) throw ValidationError("region offset must be non-negative");
  if (!(r.s_min() <= r.s_max())) {
    std::ostringstream os;
    os << "class " << r.class_id << " region is empty: S_min " << r.s_min() << " > S_max "
       << r.s_max();
    throw ValidationError(os.str());
  }
}

const ClassRegion& RegionConfig::at(int class_id) const {
  auto it = classes.find(class_id);
  if (it == classes.end()) {
    throw ValidationError("no region entry for class " + std::to_string(class_id));
  }
  return it->second;
}

ExtremesResult collect_extremes(
    const std::vector<std::pair<const VolumeU8*, const SliceScoreMap*>>& labeled,
    int class_id) {
  ExtremesResult res;
  std::size_t image_index = 0;
  for (const auto& [label, scores] : labeled) {
    validate_volume(*label);
    if (label->semantic != Semantic::label) {
      throw ValidationError("extreme collection expects label volumes");
    }
    if (scores->n_slices() != label->shape.nz) {
      throw ValidationError("score map does not cover the label volume's slices");
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    bool any = false;
    const Index slice = label->shape.ny * label->shape.nx;
    for (Index z = 0; z < label->shape.nz; ++z) {
      if ((label->data.segment(z * slice, slice) != 0).any()) {
        any = true;
        lo = std::min(lo, scores->scores[z]);
        hi = std::max(hi, scores->scores[z]);
      }
    }
    if (any) {
      res.mins.push_back(lo);
      res.maxs.push_back(hi);
    } else {
      std::ostringstream os;
      os << "image " << image_index << " has no foreground for class " << class_id
         << "; skipped";
      res.warnings.push_back(os.str());
    }
    ++image_index;
  }
  if (res.mins.empty()) {
    throw ValidationError("no image contributed foreground for class " +
                          std::to_string(class_id));
  }
  return res;
}

namespace {

std::pair<double, double> mean_and_sample_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

ClassRegion fit_region(const std::vector<double>& mins, const std::vector<double>& maxs,
                       int class_id, double offset_n, double sigma_floor) {
  if (mins.empty() || maxs.empty()) {
    throw ValidationError("fit_region needs at least one observation per end");
  }
  if (!(sigma_floor > 0.0)) throw ValidationError("sigma_floor must be positive");
  if (offset_n < 0.0) throw ValidationError("offset must be non-negative");

  ClassRegion r;
  r.class_id = class_id;
  r.offset_n = offset_n;
  auto [mu_min, sd_min] = mean_and_sample_std(mins);
  auto [mu_max, sd_max] = mean_and_sample_std(maxs);
  r.mu_min = mu_min;
  r.mu_max = mu_max;
  r.sigma_min = std::max(sd_min, sigma_floor);
  r.sigma_max = std::max(sd_max, sigma_floor);
  validate_region(r);
  return r;
}

std::vector<double> default_offset_grid() {
  return {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0};
}

SweepResult sweep_offsets(const std::vector<double>& offsets,
                          const std::function<double(double)>& evaluator) {
  if (offsets.empty()) throw ValidationError("offset sweep needs at least one offset");
  for (double o : offsets) {
    if (o < 0.0 || o > 6.0) {
      throw ValidationError("sweep offsets must lie in [0,6], got " + std::to_string(o));
    }
  }
  SweepResult res;
  double best_dice = -std::numeric_limits<double>::infinity();
  for (double o : offsets) {
    const double dice = evaluator(o);
    res.rows.push_back({o, dice});
    if (dice > best_dice || (dice == best_dice && o < res.best_offset)) {
      best_dice = dice;
      res.best_offset = o;
    }
  }
  return res;
}

void write_regions(const RegionConfig& config, const std::filesystem::path& path) {
  nlohmann::json j;
  j["classes"] = nlohmann::json::object();
  for (const auto& [id, r] : config.classes) {
    validate_region(r);
    nlohmann::json e;
    e["mu_min"] = r.mu_min;
    e["sigma_min"] = r.sigma_min;
    e["mu_max"] = r.mu_max;
    e["sigma_max"] = r.sigma_max;
    e["offset_n"] = r.offset_n;
    e["s_min"] = r.s_min();
    e["s_max"] = r.s_max();
    j["classes"][std::to_string(id)] = e;
  }
  j["provenance"] = config.provenance;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f.good()) throw IoError("write failed for " + path.string());
}

RegionConfig read_regions(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing region config " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt region config " + path.string() + ": " + e.what());
  }

  RegionConfig config;
  try {
    for (const auto& [key, e] : j.at("classes").items()) {
      ClassRegion r;
      r.class_id = std::stoi(key);
      r.mu_min = e.at("mu_min").get<double>();
      r.sigma_min = e.at("sigma_min").get<double>();
      r.mu_max = e.at("mu_max").get<double>();
      r.sigma_max = e.at("sigma_max").get<double>();
      r.offset_n = e.at("offset_n").get<double>();
      validate_region(r);
      config.classes[r.class_id] = r;
    }
    config.provenance = j.value("provenance", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt region config " + path.string() + ": " + e.what());
  }
  return config;
}

}  // namespace bodyreg
