#include "bodyreg/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bodyreg/rng.hpp"

namespace bodyreg {

double dice(const VolumeU8& a, const VolumeU8& b) {
  validate_volume(a);
  validate_volume(b);
  if ((a.data > 1).any() || (b.data > 1).any()) {
    throw ValidationError("dice needs binary masks");
  }
  if (!(a.shape == b.shape)) throw ValidationError("dice masks differ in shape");

  const Index na = (a.data != 0).count();
  const Index nb = (b.data != 0).count();
  if (na + nb == 0) return 1.0;
  const Index inter = ((a.data != 0) && (b.data != 0)).count();
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

FPReport fp_analysis(const VolumeU8& pred, const VolumeF& scores3d,
                     const ClassRegion& region, double volume_threshold_mm3,
                     double margin_sigma, Connectivity connectivity) {
  validate_volume(pred);
  validate_volume(scores3d);
  validate_region(region);
  if (!(pred.shape == scores3d.shape)) {
    throw ValidationError("prediction and score volume shapes differ");
  }
  if (margin_sigma < 0.0) throw ValidationError("margin must be non-negative");

  FPReport rep;
  rep.class_id = region.class_id;
  rep.volume_threshold_mm3 = volume_threshold_mm3;
  rep.margin_sigma = margin_sigma;

  const double lo = region.s_min() - margin_sigma * region.sigma_min;
  const double hi = region.s_max() + margin_sigma * region.sigma_max;

  const auto cs = connected_components(pred, connectivity);
  std::vector<std::vector<double>> scores_per_component(cs.count());
  for (Index i = 0; i < cs.labels.size(); ++i) {
    if (cs.labels[i] != 0) {
      scores_per_component[cs.labels[i] - 1].push_back(
          static_cast<double>(scores3d.data[i]));
    }
  }

  for (std::size_t c = 0; c < cs.count(); ++c) {
    const double vol = cs.volume_mm3(c);
    if (vol < volume_threshold_mm3) continue;
    auto& ss = scores_per_component[c];
    std::sort(ss.begin(), ss.end());
    const std::size_t n = ss.size();
    const double median = (n % 2 == 1) ? ss[n / 2] : 0.5 * (ss[n / 2 - 1] + ss[n / 2]);

    FpComponent comp;
    comp.volume_mm3 = vol;
    comp.median_score = median;
    comp.out_of_region = median < lo || median > hi;
    (comp.out_of_region ? rep.n_out_of_region : rep.n_in_region) += 1;
    rep.components.push_back(comp);
  }
  return rep;
}

std::optional<double> fp_reduction(const FPReport& reference, const FPReport& other) {
  if (reference.class_id != other.class_id) {
    throw ValidationError("fp_reduction needs reports for the same class");
  }
  if (reference.n_out_of_region == 0) return std::nullopt;
  return 100.0 * (1.0 - static_cast<double>(other.n_out_of_region) /
                            static_cast<double>(reference.n_out_of_region));
}

RankTable bootstrap_ranking(const Eigen::MatrixXd& per_case_scores,
                            const std::vector<std::string>& algorithm_names,
                            int n_boot, std::uint64_t seed) {
  const Index n_cases = per_case_scores.rows();
  const Index n_algos = per_case_scores.cols();
  if (n_algos < 2) throw ValidationError("ranking needs at least 2 algorithms");
  if (n_cases < 2) throw ValidationError("ranking needs at least 2 cases");
  if (static_cast<Index>(algorithm_names.size()) != n_algos) {
    throw ValidationError("one name per algorithm required");
  }
  if (!per_case_scores.array().isFinite().all()) {
    throw ValidationError("scores must be finite");
  }
  if (n_boot <= 0) throw ValidationError("n_boot must be positive");

  RankTable table;
  table.algorithms = algorithm_names;
  table.rank_frequency.resize(static_cast<std::size_t>(n_algos));
  table.median_rank.resize(static_cast<std::size_t>(n_algos));
  table.n_boot = n_boot;
  table.seed = seed;

  std::vector<std::vector<double>> ranks_per_algo(static_cast<std::size_t>(n_algos));
  Rng rng(seed);

  for (int b = 0; b < n_boot; ++b) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_algos);
    for (Index c = 0; c < n_cases; ++c) {
      const Index pick = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n_cases)));
      mean += per_case_scores.row(pick).transpose();
    }
    mean /= static_cast<double>(n_cases);

    // order by mean descending; equal means share the average of their ranks
    std::vector<Index> order(static_cast<std::size_t>(n_algos));
    std::iota(order.begin(), order.end(), Index(0));
    std::sort(order.begin(), order.end(), [&](Index a, Index bi) {
      if (mean[a] != mean[bi]) return mean[a] > mean[bi];
      return a < bi;
    });

    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && mean[order[j + 1]] == mean[order[i]]) ++j;
      const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
      for (std::size_t k = i; k <= j; ++k) {
        ranks_per_algo[static_cast<std::size_t>(order[k])].push_back(avg_rank);
      }
      i = j + 1;
    }
  }

  for (std::size_t a = 0; a < ranks_per_algo.size(); ++a) {
    auto& rs = ranks_per_algo[a];
    for (double r : rs) table.rank_frequency[a][r] += 1.0 / static_cast<double>(n_boot);
    std::sort(rs.begin(), rs.end());
    const std::size_t n = rs.size();
    table.median_rank[a] = (n % 2 == 1) ? rs[n / 2] : 0.5 * (rs[n / 2 - 1] + rs[n / 2]);
  }
  return table;
}

}  // namespace bodyreg
