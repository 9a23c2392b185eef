#pragma once
// Glue between the on-disk corpus layout and the in-memory types: loading
// manifest cases, calibrating regions over a training split, scoring test
// cases, and small CSV/report writers shared by the CLI and the test suites.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bodyreg/evaluate.hpp"
#include "bodyreg/manifest.hpp"
#include "bodyreg/synth.hpp"
#include "bodyreg/trainer.hpp"

namespace bodyreg {

// Label volumes live next to the image as <stem>_c<class>.vol.*.
std::vector<int> discover_label_classes(const std::filesystem::path& stem);

LabeledCase load_labeled_case(const std::filesystem::path& stem);
SupportCase load_support_case(const std::filesystem::path& stem);

struct TestCase {
  std::string name;
  VolumeF image;
  std::map<int, VolumeU8> labels;
  SliceScoreMap scores;
};

std::vector<TestCase> load_test_cases(const std::filesystem::path& manifest_path);

// Builds the training corpus: every train stem becomes a labeled case of one
// dataset, every support stem a support case.
TrainCorpus load_train_corpus(const std::filesystem::path& manifest_path,
                              RegionConfig regions);

struct CalibrationResult {
  RegionConfig config;
  std::vector<std::string> warnings;
};

// collect_extremes + fit_region over the manifest's train split, one entry per
// requested class (empty request = every class found on the first train case).
CalibrationResult calibrate_corpus(const std::filesystem::path& manifest_path,
                                   const std::vector<int>& class_ids, double offset_n,
                                   double sigma_floor);

// Fixed-format floating point for CSV/report output (shortest round-trip).
std::string format_double(double v);

void write_train_log_csv(const std::vector<EpochLog>& log,
                         const std::filesystem::path& path, bool with_timing);

// Rows: case, then one column per algorithm.
void write_dice_csv(const std::vector<std::string>& case_names,
                    const std::vector<std::string>& algorithm_names,
                    const Eigen::MatrixXd& dice, const std::filesystem::path& path);

struct ScoreMatrix {
  std::vector<std::string> case_names;
  std::vector<std::string> algorithm_names;
  Eigen::MatrixXd scores;
};

ScoreMatrix read_score_csv(const std::filesystem::path& path);

nlohmann::json loss_report_json(const LossReport& rep);
nlohmann::json fp_report_json(const FPReport& rep);
nlohmann::json rank_table_json(const RankTable& table);

// Runs fn(0..n-1); with jobs > 1 the indices are processed by a small thread
// pool, and callers must write results only to their own index.
void parallel_for_ordered(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace bodyreg
