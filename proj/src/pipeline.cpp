#include "bodyreg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "bodyreg/volume_io.hpp"

namespace bodyreg {

std::vector<int> discover_label_classes(const std::filesystem::path& stem) {
  const auto dir = stem.parent_path().empty() ? std::filesystem::path(".")
                                              : stem.parent_path();
  const std::string prefix = stem.filename().string() + "_c";
  const std::string suffix = ".vol.json";
  std::vector<int> classes;
  if (!std::filesystem::is_directory(dir)) return classes;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() <= prefix.size() + suffix.size()) continue;
    if (name.rfind(prefix, 0) != 0 || name.substr(name.size() - suffix.size()) != suffix) {
      continue;
    }
    const std::string middle =
        name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    if (middle.empty() || !std::all_of(middle.begin(), middle.end(),
                                       [](char c) { return c >= '0' && c <= '9'; })) {
      continue;
    }
    classes.push_back(std::stoi(middle));
  }
  std::sort(classes.begin(), classes.end());
  return classes;
}

LabeledCase load_labeled_case(const std::filesystem::path& stem) {
  LabeledCase c;
  c.image = read_volume_f32(stem);
  for (int cid : discover_label_classes(stem)) {
    auto label_stem = stem;
    label_stem += "_c" + std::to_string(cid);
    c.labels.emplace(cid, read_volume_u8(label_stem));
  }
  if (c.labels.empty()) {
    throw ValidationError("no label volumes found next to " + stem.string());
  }
  auto scores_file = stem;
  scores_file += ".scores.json";
  if (std::filesystem::exists(scores_file)) c.scores = read_scores(stem);
  return c;
}

SupportCase load_support_case(const std::filesystem::path& stem) {
  SupportCase c;
  c.image = read_volume_f32(stem);
  c.scores = read_scores(stem);
  if (c.scores.n_slices() != c.image.shape.nz) {
    throw ValidationError("score map does not cover the image at " + stem.string());
  }
  return c;
}

std::vector<TestCase> load_test_cases(const std::filesystem::path& manifest_path) {
  const auto manifest = read_manifest(manifest_path);
  std::vector<TestCase> cases;
  for (const auto& stem : manifest.test) {
    const auto base = resolve_stem(manifest_path, stem);
    TestCase tc;
    tc.name = stem;
    tc.image = read_volume_f32(base);
    for (int cid : discover_label_classes(base)) {
      auto label_stem = base;
      label_stem += "_c" + std::to_string(cid);
      tc.labels.emplace(cid, read_volume_u8(label_stem));
    }
    tc.scores = read_scores(base);
    cases.push_back(std::move(tc));
  }
  return cases;
}

TrainCorpus load_train_corpus(const std::filesystem::path& manifest_path,
                              RegionConfig regions) {
  const auto manifest = read_manifest(manifest_path);
  if (manifest.train.empty()) {
    throw ValidationError("manifest has no training cases: " + manifest_path.string());
  }

  TrainCorpus corpus;
  corpus.regions = std::move(regions);

  std::set<int> annotated;
  for (const auto& stem : manifest.train) {
    auto c = load_labeled_case(resolve_stem(manifest_path, stem));
    for (const auto& [cid, _] : c.labels) annotated.insert(cid);
    c.dataset = 0;
    corpus.labeled.push_back(std::move(c));
  }
  corpus.datasets.push_back(DatasetSpec{"train", annotated, 1.0});

  for (const auto& stem : manifest.support) {
    corpus.support.push_back(load_support_case(resolve_stem(manifest_path, stem)));
  }
  return corpus;
}

CalibrationResult calibrate_corpus(const std::filesystem::path& manifest_path,
                                   const std::vector<int>& class_ids, double offset_n,
                                   double sigma_floor) {
  const auto manifest = read_manifest(manifest_path);
  if (manifest.train.empty()) {
    throw ValidationError("manifest has no training cases: " + manifest_path.string());
  }

  std::vector<LabeledCase> cases;
  for (const auto& stem : manifest.train) {
    auto c = load_labeled_case(resolve_stem(manifest_path, stem));
    if (!c.scores.has_value()) {
      throw ValidationError("training case " + stem + " has no slice scores");
    }
    cases.push_back(std::move(c));
  }

  std::vector<int> targets = class_ids;
  if (targets.empty()) {
    for (const auto& [cid, _] : cases.front().labels) targets.push_back(cid);
  }

  CalibrationResult res;
  for (int cid : targets) {
    std::vector<std::pair<const VolumeU8*, const SliceScoreMap*>> pairs;
    for (const auto& c : cases) {
      auto it = c.labels.find(cid);
      if (it == c.labels.end()) {
        res.warnings.push_back("class " + std::to_string(cid) + " missing on a train case");
        continue;
      }
      pairs.emplace_back(&it->second, &*c.scores);
    }
    auto extremes = collect_extremes(pairs, cid);
    for (auto& w : extremes.warnings) res.warnings.push_back(std::move(w));
    res.config.classes[cid] =
        fit_region(extremes.mins, extremes.maxs, cid, offset_n, sigma_floor);
  }
  std::ostringstream prov;
  prov << "corpus=" << manifest_path.filename().string() << ";n_train=" << manifest.train.size();
  res.config.provenance = prov.str();
  return res;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  std::string s = os.str();
  // shortest representation that round-trips
  for (int prec = 1; prec < 17; ++prec) {
    std::ostringstream t;
    t.precision(prec);
    t << v;
    double back = 0.0;
    std::istringstream(t.str()) >> back;
    if (back == v) return t.str();
  }
  return s;
}

void write_train_log_csv(const std::vector<EpochLog>& log,
                         const std::filesystem::path& path, bool with_timing) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "epoch,supervised_loss,region_loss,wall_time_ms\n";
  for (const auto& e : log) {
    f << e.epoch << "," << format_double(e.supervised_loss) << ","
      << format_double(e.region_loss) << ","
      << format_double(with_timing ? e.wall_time_ms : 0.0) << "\n";
  }
  if (!f.good()) throw IoError("write failed for " + path.string());
}

void write_dice_csv(const std::vector<std::string>& case_names,
                    const std::vector<std::string>& algorithm_names,
                    const Eigen::MatrixXd& dice, const std::filesystem::path& path) {
  if (dice.rows() != static_cast<Index>(case_names.size()) ||
      dice.cols() != static_cast<Index>(algorithm_names.size())) {
    throw ValidationError("dice matrix does not match the name lists");
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "case";
  for (const auto& a : algorithm_names) f << "," << a;
  f << "\n";
  for (Index r = 0; r < dice.rows(); ++r) {
    f << case_names[static_cast<std::size_t>(r)];
    for (Index c = 0; c < dice.cols(); ++c) f << "," << format_double(dice(r, c));
    f << "\n";
  }
  if (!f.good()) throw IoError("write failed for " + path.string());
}

ScoreMatrix read_score_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing score table " + path.string());

  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    return out;
  };

  std::string line;
  if (!std::getline(f, line)) throw IoError("empty score table " + path.string());
  auto header = split(line);
  if (header.size() < 3) {
    throw ValidationError("score table needs a case column and at least 2 algorithms");
  }

  ScoreMatrix m;
  m.algorithm_names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != header.size()) {
      throw ValidationError("ragged row in score table " + path.string());
    }
    m.case_names.push_back(fields[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        row.push_back(std::stod(fields[i]));
      } catch (const std::exception&) {
        throw ValidationError("non-numeric score '" + fields[i] + "' in " + path.string());
      }
    }
    rows.push_back(std::move(row));
  }
  m.scores.resize(static_cast<Index>(rows.size()), static_cast<Index>(m.algorithm_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m.scores(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
  }
  return m;
}

nlohmann::json loss_report_json(const LossReport& rep) {
  nlohmann::json j;
  j["value"] = rep.value;
  j["M"] = rep.m_selected;
  j["N_hat"] = rep.n_invalid;
  return j;
}

nlohmann::json fp_report_json(const FPReport& rep) {
  nlohmann::json j;
  j["class_id"] = rep.class_id;
  j["volume_threshold_mm3"] = rep.volume_threshold_mm3;
  j["margin_sigma"] = rep.margin_sigma;
  j["n_in_region"] = rep.n_in_region;
  j["n_out_of_region"] = rep.n_out_of_region;
  j["components"] = nlohmann::json::array();
  for (const auto& c : rep.components) {
    j["components"].push_back({{"volume_mm3", c.volume_mm3},
                               {"median_score", c.median_score},
                               {"out_of_region", c.out_of_region}});
  }
  return j;
}

nlohmann::json rank_table_json(const RankTable& table) {
  nlohmann::json j;
  j["n_boot"] = table.n_boot;
  j["seed"] = table.seed;
  j["algorithms"] = nlohmann::json::array();
  for (std::size_t a = 0; a < table.algorithms.size(); ++a) {
    nlohmann::json e;
    e["name"] = table.algorithms[a];
    e["median_rank"] = table.median_rank[a];
    nlohmann::json freq = nlohmann::json::object();
    for (const auto& [rank, f] : table.rank_frequency[a]) {
      freq[format_double(rank)] = f;
    }
    e["rank_frequency"] = freq;
    j["algorithms"].push_back(std::move(e));
  }
  return j;
}

void parallel_for_ordered(std::size_t n, int jobs,
                          const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace bodyreg
