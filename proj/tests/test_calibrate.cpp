#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bodyreg/calibrate.hpp"
#include "test_support.hpp"

using namespace bodyreg;

namespace {

// independent mean / sample-std oracle
std::pair<double, double> oracle_mean_std(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double sd = xs.size() > 1 ? std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0)) : 0.0;
  return {m, sd};
}

SliceScoreMap linear_scores(Index n, double lo, double hi) {
  Eigen::ArrayXd s(n);
  for (Index i = 0; i < n; ++i) {
    s[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return make_score_map(s, Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, true));
}

}  // namespace

TEST_CASE("collect_extremes reads min/max foreground scores per image") {
  // scores 40,41,42 on the three slices; foreground everywhere
  const auto scores = linear_scores(3, 40.0, 42.0);
  auto label = make_volume<std::uint8_t>({3, 1, 1}, {1, 1, 1}, Semantic::label, 1);

  const auto res = collect_extremes({{&label, &scores}}, 1);
  REQUIRE(res.mins.size() == 1);
  CHECK(res.mins[0] == 40.0);
  CHECK(res.maxs[0] == 42.0);

  SUBCASE("foreground on a subset of slices") {
    label.data.setZero();
    label.at(1, 0, 0) = 1;
    const auto mid = collect_extremes({{&label, &scores}}, 1);
    CHECK(mid.mins[0] == 41.0);
    CHECK(mid.maxs[0] == 41.0);
  }
}

TEST_CASE("images without foreground are skipped with a warning") {
  const auto scores = linear_scores(3, 10.0, 20.0);
  const auto fg = make_volume<std::uint8_t>({3, 1, 1}, {1, 1, 1}, Semantic::label, 1);
  const auto empty = make_volume<std::uint8_t>({3, 1, 1}, {1, 1, 1}, Semantic::label, 0);

  const auto res = collect_extremes({{&fg, &scores}, {&empty, &scores}}, 1);
  CHECK(res.mins.size() == 1);
  CHECK(res.warnings.size() == 1);

  CHECK_THROWS_AS(collect_extremes({{&empty, &scores}}, 1), ValidationError);
}

TEST_CASE("three images pass their extremes through") {
  const auto s1 = linear_scores(2, 30.0, 50.0);
  const auto s2 = linear_scores(2, 33.0, 52.0);
  const auto s3 = linear_scores(2, 36.0, 54.0);
  const auto fg = make_volume<std::uint8_t>({2, 1, 1}, {1, 1, 1}, Semantic::label, 1);
  const auto res = collect_extremes({{&fg, &s1}, {&fg, &s2}, {&fg, &s3}}, 1);
  CHECK(res.mins == std::vector<double>{30.0, 33.0, 36.0});
  CHECK(res.maxs == std::vector<double>{50.0, 52.0, 54.0});
}

TEST_CASE("fit_region: mean 33, sample std 3 on {30,33,36}") {
  const auto r = fit_region({30, 33, 36}, {50, 52, 54}, 1, 0.0);
  CHECK(r.mu_min == doctest::Approx(33.0).epsilon(1e-15));
  CHECK(r.sigma_min == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(r.s_min() == doctest::Approx(33.0).epsilon(1e-15));
  CHECK(r.mu_max == doctest::Approx(52.0).epsilon(1e-15));
}

TEST_CASE("fit_region handles the liver-like reference values") {
  // one synthetic list reproducing the reference means/stds
  const std::vector<double> mins{29.78, 33.09, 36.40};
  const auto [mu, sd] = oracle_mean_std(mins);
  const auto r = fit_region(mins, {52.73, 52.73, 52.73}, 1, 2.0, 0.5);
  CHECK(r.mu_min == doctest::Approx(mu).epsilon(1e-12));
  CHECK(r.sigma_min == doctest::Approx(sd).epsilon(1e-12));
  CHECK(r.s_min() == doctest::Approx(mu - 2.0 * sd).epsilon(1e-12));
  // sigma_max collapses to the floor on identical observations
  CHECK(r.sigma_max == 0.5);
  CHECK(r.s_max() == doctest::Approx(52.73 + 2.0 * 0.5).epsilon(1e-12));
}

TEST_CASE("single observation uses the sigma floor and keeps the observed min") {
  const auto r = fit_region({41.5}, {47.0}, 2, 0.0);
  CHECK(r.sigma_min == kDefaultSigmaFloor);
  CHECK(r.sigma_max == kDefaultSigmaFloor);
  CHECK(r.s_min() == 41.5);
  CHECK(r.s_max() == 47.0);
  CHECK_THROWS_AS(fit_region({}, {}, 2, 0.0), ValidationError);
}

TEST_CASE("property: fit_region is permutation-invariant") {
  std::vector<double> mins{31.2, 29.9, 35.1, 33.3, 30.7};
  std::vector<double> maxs{50.2, 49.9, 55.1, 53.3, 50.7};
  const auto a = fit_region(mins, maxs, 1, 1.0);
  std::mt19937 shuffler(7);
  std::shuffle(mins.begin(), mins.end(), shuffler);
  std::shuffle(maxs.begin(), maxs.end(), shuffler);
  const auto b = fit_region(mins, maxs, 1, 1.0);
  CHECK(a.mu_min == doctest::Approx(b.mu_min).epsilon(1e-15));
  CHECK(a.sigma_min == doctest::Approx(b.sigma_min).epsilon(1e-15));
  CHECK(a.mu_max == doctest::Approx(b.mu_max).epsilon(1e-15));
  CHECK(a.sigma_max == doctest::Approx(b.sigma_max).epsilon(1e-15));
}

TEST_CASE("property: recovered mu/sigma match the direct formulas to 1e-12 relative") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.uniform_index(100);
    std::vector<double> mins, maxs;
    for (std::size_t i = 0; i < n; ++i) {
      mins.push_back(rng.normal(35.0, 3.0));
      maxs.push_back(rng.normal(52.0, 2.0));
    }
    const auto [mu, sd] = oracle_mean_std(mins);
    const auto r = fit_region(mins, maxs, 1, 0.0, 1e-30);  // floor disabled
    CHECK(std::abs(r.mu_min - mu) <= 1e-12 * std::abs(mu));
    CHECK(std::abs(r.sigma_min - sd) <= 1e-12 * std::abs(sd));
  }
}

TEST_CASE("property: larger offsets nest the valid intervals") {
  const std::vector<double> mins{30, 33, 36}, maxs{50, 52, 54};
  double prev_lo = 0, prev_hi = 0;
  bool first = true;
  for (double offset : default_offset_grid()) {
    const auto r = fit_region(mins, maxs, 1, offset);
    if (!first) {
      CHECK(r.s_min() <= prev_lo);
      CHECK(r.s_max() >= prev_hi);
    }
    prev_lo = r.s_min();
    prev_hi = r.s_max();
    first = false;
  }
}

TEST_CASE("the default offset grid is half steps to 3, then whole steps to 6") {
  CHECK(default_offset_grid() ==
        std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0});
}

TEST_CASE("sweep_offsets picks the best row, ties toward the smaller offset") {
  SUBCASE("single offset wins trivially") {
    const auto res = sweep_offsets({2.0}, [](double) { return 0.7; });
    REQUIRE(res.rows.size() == 1);
    CHECK(res.best_offset == 2.0);
  }
  SUBCASE("constant evaluator ties break to the smallest offset") {
    const auto res = sweep_offsets({3.0, 1.0, 2.0}, [](double) { return 0.5; });
    CHECK(res.best_offset == 1.0);
  }
  SUBCASE("peaked evaluator picks the peak") {
    const auto res =
        sweep_offsets(default_offset_grid(), [](double o) { return -(o - 2.0) * (o - 2.0); });
    CHECK(res.best_offset == 2.0);
  }
  SUBCASE("offsets outside [0,6] are rejected") {
    CHECK_THROWS_AS(sweep_offsets({7.0}, [](double) { return 0.0; }), ValidationError);
    CHECK_THROWS_AS(sweep_offsets({}, [](double) { return 0.0; }), ValidationError);
  }
}

TEST_CASE("regions.json round-trips") {
  testutil::ScratchDir dir("regions_io");
  RegionConfig config;
  config.classes[1] = fit_region({30, 33, 36}, {50, 52, 54}, 1, 1.5);
  config.classes[4] = fit_region({34.34}, {44.1}, 4, 2.0);
  config.provenance = "corpus=unit;n_train=3";
  write_regions(config, dir / "regions.json");

  const auto back = read_regions(dir / "regions.json");
  CHECK(back.provenance == config.provenance);
  REQUIRE(back.classes.size() == 2);
  CHECK(back.at(1).mu_min == doctest::Approx(config.at(1).mu_min).epsilon(1e-15));
  CHECK(back.at(1).s_max() == doctest::Approx(config.at(1).s_max()).epsilon(1e-15));
  CHECK(back.at(4).offset_n == 2.0);
  CHECK_THROWS_AS(back.at(9), ValidationError);
  CHECK_THROWS_AS(read_regions(dir / "missing.json"), IoError);
}
