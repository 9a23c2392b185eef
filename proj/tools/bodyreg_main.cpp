// bodyreg: phantom benchmarks, valid-region calibration, regional-penalty
// losses, desk-scale training, postprocessing baselines and evaluation, all
// behind one batch CLI. Exit codes: 0 ok, 1 validation error, 2 I/O error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bodyreg/pipeline.hpp"
#include "bodyreg/volume_io.hpp"

namespace {

using namespace bodyreg;

void emit_json(const nlohmann::json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + out_path);
  f << text;
  if (!f.good()) throw IoError("write failed for " + out_path);
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::string field;
  std::istringstream is(csv);
  while (std::getline(is, field, ',')) {
    if (field.empty()) continue;
    try {
      out.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw ValidationError("cannot parse number '" + field + "'");
    }
  }
  return out;
}

// Slice scores from <stem>.scores.json, expanded to the reference grid.
VolumeF load_scores3d(const std::string& scores_stem, const VolumeF& reference) {
  const auto map = read_scores(scores_stem);
  return expand_to_volume(map, reference.shape, reference.spacing_mm);
}

VolumeF load_scores3d(const std::string& scores_stem, const VolumeU8& reference) {
  const auto map = read_scores(scores_stem);
  return expand_to_volume(map, reference.shape, reference.spacing_mm);
}

struct TrainOptions {
  std::string manifest;
  std::string regions;
  std::string mode = "region_loss";
  std::uint64_t seed = 0;
  int epochs = 0;
  Index patch_size = 0;
  int patches_per_epoch = 0;
  double learning_rate = 0.0;
  double alpha = 10.0;
  double k_percent = 1.0;
  double p_support = 0.2;
  double oversample_fg = 0.33;
  Index hidden = 16;
  std::string sampling = "uniform";
};

TrainConfig to_config(const TrainOptions& o) {
  TrainConfig cfg;
  cfg.seed = o.seed;
  cfg.epochs = o.epochs;
  cfg.patch_size = o.patch_size;
  cfg.patches_per_epoch = o.patches_per_epoch;
  cfg.learning_rate = o.learning_rate;
  cfg.alpha = o.alpha;
  cfg.k_percent = o.k_percent;
  cfg.p_support = o.p_support;
  cfg.oversample_foreground = o.oversample_fg;
  cfg.hidden = o.hidden;
  cfg.mode = loss_mode_from_string(o.mode);
  if (o.sampling == "uniform") {
    cfg.sampling = SamplingMode::uniform;
  } else if (o.sampling == "sqrt_inverse") {
    cfg.sampling = SamplingMode::sqrt_inverse;
  } else {
    throw ValidationError("unknown sampling mode '" + o.sampling + "'");
  }
  return cfg;
}

enum class RegionsFlag { none, optional };

void add_train_flags(CLI::App* cmd, TrainOptions& o, RegionsFlag regions_flag) {
  cmd->add_option("--manifest", o.manifest, "corpus manifest.json")->required();
  if (regions_flag == RegionsFlag::optional) {
    cmd->add_option("--regions", o.regions, "regions.json with valid intervals");
  }
  cmd->add_option("--seed", o.seed, "random seed")->required();
  cmd->add_option("--epochs", o.epochs, "training epochs")->required();
  cmd->add_option("--patch-size", o.patch_size, "cubic patch edge, voxels")->required();
  cmd->add_option("--patches-per-epoch", o.patches_per_epoch, "patches per epoch")->required();
  cmd->add_option("--lr", o.learning_rate, "gradient step size")->required();
  cmd->add_option("--alpha", o.alpha, "regional penalty weight")->capture_default_str();
  cmd->add_option("--topk", o.k_percent, "top-k percentage")->capture_default_str();
  cmd->add_option("--p-support", o.p_support, "support draw probability")->capture_default_str();
  cmd->add_option("--oversample-fg", o.oversample_fg, "foreground-centered patch fraction")->capture_default_str();
  cmd->add_option("--hidden", o.hidden, "hidden units")->capture_default_str();
  cmd->add_option("--sampling", o.sampling, "dataset sampling: uniform|sqrt_inverse")->capture_default_str();
}

TrainResult run_training(const TrainOptions& o) {
  RegionConfig regions;
  if (!o.regions.empty()) regions = read_regions(o.regions);
  auto corpus = load_train_corpus(o.manifest, std::move(regions));
  return train(to_config(o), corpus);
}

int dispatch(int argc, char** argv) {
  CLI::App app{"body-region-aware segmentation toolkit"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a phantom benchmark corpus");
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  int n_train = 8, n_support = 8, n_test = 4;
  synth->add_option("--seed", synth_seed, "random seed")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n-train", n_train, "labeled abdominal phantoms")->capture_default_str();
  synth->add_option("--n-support", n_support, "unlabeled whole-body phantoms")->capture_default_str();
  synth->add_option("--n-test", n_test, "whole-body test phantoms")->capture_default_str();
  synth->callback([&] {
    const auto res = generate_benchmark(synth_seed, n_train, n_support, n_test, synth_out);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "wrote " << res.manifest_path.string() << "\n";
  });

  // ---- calibrate ----
  auto* cal = app.add_subcommand("calibrate", "fit per-class valid score intervals");
  std::string cal_manifest, cal_out;
  double cal_offset = 0.0, cal_sigma_floor = kDefaultSigmaFloor;
  std::vector<int> cal_classes;
  cal->add_option("--manifest", cal_manifest, "corpus manifest.json")->required();
  cal->add_option("--out", cal_out, "regions.json to write")->required();
  cal->add_option("--offset", cal_offset, "sigma multiplier widening the interval")->capture_default_str();
  cal->add_option("--sigma-floor", cal_sigma_floor, "lower bound on sigma")->capture_default_str();
  cal->add_option("--class", cal_classes, "class id (repeatable; default: all found)");
  cal->callback([&] {
    auto res = calibrate_corpus(cal_manifest, cal_classes, cal_offset, cal_sigma_floor);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    write_regions(res.config, cal_out);
  });

  // ---- sweep ----
  auto* sweep = app.add_subcommand("sweep", "evaluate boundary offsets by training and scoring");
  TrainOptions sweep_train;
  int sweep_class = 0;
  std::string sweep_offsets_csv, sweep_out;
  double sweep_sigma_floor = kDefaultSigmaFloor;
  double sweep_threshold = 0.5;
  add_train_flags(sweep, sweep_train, RegionsFlag::none);
  sweep->add_option("--class", sweep_class, "class id to score")->required();
  sweep->add_option("--offsets", sweep_offsets_csv, "comma list; default 0,0.5,...,3,4,5,6");
  sweep->add_option("--sigma-floor", sweep_sigma_floor, "lower bound on sigma")->capture_default_str();
  sweep->add_option("--threshold", sweep_threshold, "mask threshold")->capture_default_str();
  sweep->add_option("--out", sweep_out, "sweep CSV to write")->required();
  sweep->callback([&] {
    const auto offsets = sweep_offsets_csv.empty() ? default_offset_grid()
                                                   : parse_double_list(sweep_offsets_csv);
    const auto tests = load_test_cases(sweep_train.manifest);
    if (tests.empty()) throw ValidationError("sweep needs test cases in the manifest");

    auto evaluate_offset = [&](double offset) {
      auto cal = calibrate_corpus(sweep_train.manifest, {}, offset, sweep_sigma_floor);
      TrainOptions o = sweep_train;
      o.regions.clear();
      auto corpus = load_train_corpus(o.manifest, std::move(cal.config));
      const auto trained = train(to_config(o), corpus);
      double sum = 0.0;
      for (const auto& tc : tests) {
        const auto prob = predict_volume(trained.model, tc.image,
                                         to_config(o).features, sweep_class);
        sum += dice(threshold_mask(prob, sweep_threshold), tc.labels.at(sweep_class));
      }
      return sum / static_cast<double>(tests.size());
    };

    const auto result = sweep_offsets(offsets, evaluate_offset);
    std::ofstream f(sweep_out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + sweep_out);
    f << "offset,mean_dice\n";
    for (const auto& row : result.rows) {
      f << format_double(row.offset) << "," << format_double(row.mean_dice) << "\n";
    }
    if (!f.good()) throw IoError("write failed for " + sweep_out);
    emit_json({{"best_offset", result.best_offset}}, "");
  });

  // ---- loss ----
  auto* loss = app.add_subcommand("loss", "regional penalty for one prediction volume");
  std::string loss_pred, loss_scores, loss_regions, loss_out;
  int loss_class = 0;
  double loss_alpha = 1.0, loss_topk = 1.0, loss_eps = kDefaultClampEps;
  loss->add_option("--pred", loss_pred, "prediction volume stem (f32)")->required();
  loss->add_option("--scores", loss_scores, "slice score stem")->required();
  loss->add_option("--regions", loss_regions, "regions.json")->required();
  loss->add_option("--class", loss_class, "class id")->required();
  loss->add_option("--alpha", loss_alpha, "penalty weight")->capture_default_str();
  loss->add_option("--topk", loss_topk, "top-k percentage")->capture_default_str();
  loss->add_option("--eps", loss_eps, "prediction clamp")->capture_default_str();
  loss->add_option("--out", loss_out, "write JSON here instead of stdout");
  loss->callback([&] {
    const auto pred = read_volume_f32(loss_pred);
    const auto scores3d = load_scores3d(loss_scores, pred);
    const auto regions = read_regions(loss_regions);
    const auto wf = weight_field(scores3d, regions.at(loss_class));
    const auto rep = region_loss(pred, wf, loss_alpha, loss_topk, loss_eps);
    emit_json(loss_report_json(rep), loss_out);
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train the per-voxel model");
  TrainOptions train_opt;
  std::string train_out, train_log;
  bool train_timing = false;
  add_train_flags(tr, train_opt, RegionsFlag::optional);
  tr->add_option("--mode", train_opt.mode, "baseline|region_loss")->capture_default_str();
  tr->add_option("--out", train_out, "model JSON to write")->required();
  tr->add_option("--log", train_log, "per-epoch CSV log");
  tr->add_flag("--timing", train_timing,
               "record measured wall time in the log (not reproducible)");
  tr->callback([&] {
    if (train_opt.mode == "region_loss" && train_opt.regions.empty()) {
      throw ValidationError("--regions is required in region_loss mode");
    }
    const auto result = run_training(train_opt);
    save_model(result.model, train_out);
    if (!train_log.empty()) write_train_log_csv(result.log, train_log, train_timing);
  });

  // ---- predict ----
  auto* pr = app.add_subcommand("predict", "voxelwise class probabilities and masks");
  std::string pr_model, pr_image, pr_out;
  double pr_threshold = 0.5;
  pr->add_option("--model", pr_model, "model JSON")->required();
  pr->add_option("--image", pr_image, "image volume stem")->required();
  pr->add_option("--out", pr_out, "output stem; writes <out>_c<id> and <out>_c<id>_mask")
      ->required();
  pr->add_option("--threshold", pr_threshold, "mask threshold")->capture_default_str();
  pr->callback([&] {
    const auto model = load_model(pr_model);
    const auto image = read_volume_f32(pr_image);
    FeatureExtractor fx;
    const auto probs = predict_all(model, image, fx);
    for (const auto& [cid, prob] : probs) {
      write_volume(prob, pr_out + "_c" + std::to_string(cid));
      write_volume(threshold_mask(prob, pr_threshold),
                   pr_out + "_c" + std::to_string(cid) + "_mask");
    }
  });

  // ---- postprocess ----
  auto* post = app.add_subcommand("postprocess", "prediction cleanup baselines");
  post->require_subcommand(1);

  auto* lc = post->add_subcommand("lc", "keep only the largest connected component");
  std::string lc_mask, lc_out;
  int lc_conn = 26;
  lc->add_option("--mask", lc_mask, "binary mask stem")->required();
  lc->add_option("--connectivity", lc_conn, "6 or 26")->capture_default_str();
  lc->add_option("--out", lc_out, "output stem")->required();
  lc->callback([&] {
    const auto mask = read_volume_u8(lc_mask);
    write_volume(largest_component_filter(mask, connectivity_from_int(lc_conn)), lc_out);
  });

  auto* crop = post->add_subcommand("bpr-crop", "zero predictions outside the valid region");
  std::string crop_mask, crop_scores, crop_regions, crop_out;
  int crop_class = 0;
  double crop_margin = 0.0;
  crop->add_option("--mask", crop_mask, "binary mask stem")->required();
  crop->add_option("--scores", crop_scores, "slice score stem")->required();
  crop->add_option("--regions", crop_regions, "regions.json")->required();
  crop->add_option("--class", crop_class, "class id")->required();
  crop->add_option("--margin", crop_margin, "margin in sigmas")->capture_default_str();
  crop->add_option("--out", crop_out, "output stem")->required();
  crop->callback([&] {
    const auto mask = read_volume_u8(crop_mask);
    const auto scores3d = load_scores3d(crop_scores, mask);
    const auto regions = read_regions(crop_regions);
    write_volume(bpr_crop(mask, scores3d, regions.at(crop_class), crop_margin), crop_out);
  });

  auto* tune = post->add_subcommand("tune-crop", "pick the crop margin with the best mean Dice");
  std::string tune_manifest, tune_pred_dir, tune_regions, tune_out;
  int tune_class = 0;
  std::string tune_margins = "0,0.5,1,1.5,2,3";
  tune->add_option("--manifest", tune_manifest, "corpus manifest.json")->required();
  tune->add_option("--pred-dir", tune_pred_dir, "directory of <stem>_c<id>_mask volumes")
      ->required();
  tune->add_option("--regions", tune_regions, "regions.json")->required();
  tune->add_option("--class", tune_class, "class id")->required();
  tune->add_option("--margins", tune_margins, "comma list of candidate margins")->capture_default_str();
  tune->add_option("--out", tune_out, "write JSON here instead of stdout");
  tune->callback([&] {
    const auto regions = read_regions(tune_regions);
    const auto tests = load_test_cases(tune_manifest);
    if (tests.empty()) throw ValidationError("margin tuning needs test cases");
    std::vector<CropTuneCase> cases;
    for (const auto& tc : tests) {
      CropTuneCase c;
      const auto mask_stem = std::filesystem::path(tune_pred_dir) /
                             (std::filesystem::path(tc.name).filename().string() + "_c" +
                              std::to_string(tune_class) + "_mask");
      c.pred = read_volume_u8(mask_stem);
      c.ground_truth = tc.labels.at(tune_class);
      c.scores3d = expand_to_volume(tc.scores, c.pred.shape, c.pred.spacing_mm);
      cases.push_back(std::move(c));
    }
    const double best = tune_crop_margin(cases, regions.at(tune_class),
                                         parse_double_list(tune_margins));
    emit_json({{"best_margin", best}}, tune_out);
  });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "metrics and analyses");
  ev->require_subcommand(1);

  auto* evd = ev->add_subcommand("dice", "overlap between two binary masks");
  std::string evd_pred, evd_gt, evd_out;
  evd->add_option("--pred", evd_pred, "prediction mask stem")->required();
  evd->add_option("--gt", evd_gt, "ground-truth mask stem")->required();
  evd->add_option("--out", evd_out, "write JSON here instead of stdout");
  evd->callback([&] {
    const double d = dice(read_volume_u8(evd_pred), read_volume_u8(evd_gt));
    emit_json({{"dice", d}}, evd_out);
  });

  auto* evf = ev->add_subcommand("fp", "volume-thresholded false-positive analysis");
  std::string evf_pred, evf_scores, evf_regions, evf_out;
  int evf_class = 0, evf_conn = 26;
  double evf_threshold = 1000.0, evf_margin = 0.0;
  evf->add_option("--pred", evf_pred, "prediction mask stem")->required();
  evf->add_option("--scores", evf_scores, "slice score stem")->required();
  evf->add_option("--regions", evf_regions, "regions.json")->required();
  evf->add_option("--class", evf_class, "class id")->required();
  evf->add_option("--threshold-mm3", evf_threshold, "component volume threshold")->capture_default_str();
  evf->add_option("--margin", evf_margin, "margin in sigmas")->capture_default_str();
  evf->add_option("--connectivity", evf_conn, "6 or 26")->capture_default_str();
  evf->add_option("--out", evf_out, "write JSON here instead of stdout");
  evf->callback([&] {
    const auto pred = read_volume_u8(evf_pred);
    const auto scores3d = load_scores3d(evf_scores, pred);
    const auto regions = read_regions(evf_regions);
    const auto rep = fp_analysis(pred, scores3d, regions.at(evf_class), evf_threshold,
                                 evf_margin, connectivity_from_int(evf_conn));
    emit_json(fp_report_json(rep), evf_out);
  });

  auto* evr = ev->add_subcommand("rank", "bootstrap ranking stability");
  std::string evr_csv, evr_out;
  int evr_boot = 1000;
  std::uint64_t evr_seed = 0;
  evr->add_option("--csv", evr_csv, "case x algorithm score table")->required();
  evr->add_option("--n-boot", evr_boot, "bootstrap samples")->capture_default_str();
  evr->add_option("--seed", evr_seed, "random seed")->required();
  evr->add_option("--out", evr_out, "write JSON here instead of stdout");
  evr->callback([&] {
    const auto m = read_score_csv(evr_csv);
    const auto table = bootstrap_ranking(m.scores, m.algorithm_names, evr_boot, evr_seed);
    emit_json(rank_table_json(table), evr_out);
  });

  // ---- report ----
  auto* rep = app.add_subcommand("report", "per-case Dice, FP totals and ranking over prediction sets");
  std::string rep_manifest, rep_regions, rep_out_dir, rep_names;
  std::vector<std::string> rep_pred_dirs;
  int rep_class = 0, rep_jobs = 1, rep_boot = 1000;
  double rep_threshold = 1000.0, rep_margin = 0.0;
  std::uint64_t rep_seed = 0;
  rep->add_option("--manifest", rep_manifest, "corpus manifest.json")->required();
  rep->add_option("--pred-dir", rep_pred_dirs, "prediction directory (repeatable)")->required();
  rep->add_option("--names", rep_names, "comma list of algorithm names");
  rep->add_option("--regions", rep_regions, "regions.json for the FP analysis")->required();
  rep->add_option("--class", rep_class, "class id")->required();
  rep->add_option("--threshold-mm3", rep_threshold, "FP component volume threshold")->capture_default_str();
  rep->add_option("--margin", rep_margin, "FP margin in sigmas")->capture_default_str();
  rep->add_option("--seed", rep_seed, "bootstrap seed")->required();
  rep->add_option("--n-boot", rep_boot, "bootstrap samples")->capture_default_str();
  rep->add_option("--jobs", rep_jobs, "parallel workers over cases")->capture_default_str();
  rep->add_option("--out-dir", rep_out_dir, "report directory")->required();
  rep->callback([&] {
    const auto regions = read_regions(rep_regions);
    const auto& region = regions.at(rep_class);
    const auto tests = load_test_cases(rep_manifest);
    if (tests.empty()) throw ValidationError("report needs test cases");

    std::vector<std::string> names;
    if (rep_names.empty()) {
      for (const auto& d : rep_pred_dirs) {
        names.push_back(std::filesystem::path(d).filename().string());
      }
    } else {
      std::string field;
      std::istringstream is(rep_names);
      while (std::getline(is, field, ',')) names.push_back(field);
    }
    if (names.size() != rep_pred_dirs.size()) {
      throw ValidationError("--names must match the number of --pred-dir entries");
    }

    std::filesystem::create_directories(rep_out_dir);
    const auto n_cases = tests.size();
    const auto n_algos = rep_pred_dirs.size();
    Eigen::MatrixXd dices(static_cast<Index>(n_cases), static_cast<Index>(n_algos));
    std::vector<int> fp_in(n_algos, 0), fp_out(n_algos, 0);
    std::vector<std::string> case_names;
    for (const auto& tc : tests) {
      case_names.push_back(std::filesystem::path(tc.name).filename().string());
    }

    for (std::size_t a = 0; a < n_algos; ++a) {
      std::vector<FPReport> reports(n_cases);
      parallel_for_ordered(n_cases, rep_jobs, [&](std::size_t c) {
        const auto& tc = tests[c];
        const auto mask_stem = std::filesystem::path(rep_pred_dirs[a]) /
                               (case_names[c] + "_c" + std::to_string(rep_class) + "_mask");
        const auto mask = read_volume_u8(mask_stem);
        const auto scores3d = expand_to_volume(tc.scores, mask.shape, mask.spacing_mm);
        dices(static_cast<Index>(c), static_cast<Index>(a)) =
            dice(mask, tc.labels.at(rep_class));
        reports[c] = fp_analysis(mask, scores3d, region, rep_threshold, rep_margin);
      });
      for (const auto& r : reports) {
        fp_in[a] += r.n_in_region;
        fp_out[a] += r.n_out_of_region;
      }
    }

    write_dice_csv(case_names, names,dices,
                   std::filesystem::path(rep_out_dir) / "per_case_dice.csv");

    nlohmann::json summary;
    summary["class_id"] = rep_class;
    summary["algorithms"] = nlohmann::json::array();
    for (std::size_t a = 0; a < n_algos; ++a) {
      nlohmann::json e;
      e["name"] = names[a];
      e["mean_dice"] = dices.col(static_cast<Index>(a)).mean();
      e["fp_in_region"] = fp_in[a];
      e["fp_out_of_region"] = fp_out[a];
      if (a > 0) {
        FPReport ra, rb;
        ra.class_id = rb.class_id = rep_class;
        ra.n_out_of_region = fp_out[0];
        rb.n_out_of_region = fp_out[a];
        const auto red = fp_reduction(ra, rb);
        if (red.has_value()) {
          e["fp_out_reduction_vs_first_percent"] = *red;
        } else {
          e["fp_out_reduction_vs_first_percent"] = nullptr;
        }
      }
      summary["algorithms"].push_back(std::move(e));
    }
    emit_json(summary, (std::filesystem::path(rep_out_dir) / "summary.json").string());

    if (n_algos >= 2) {
      const auto table = bootstrap_ranking(dices, names, rep_boot, rep_seed);
      emit_json(rank_table_json(table),
                (std::filesystem::path(rep_out_dir) / "rank.json").string());
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help text or the parse error
    return code == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const bodyreg::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const bodyreg::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
