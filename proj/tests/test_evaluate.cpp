#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bodyreg/evaluate.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace bodyreg;

namespace {

ClassRegion liver_region() {
  ClassRegion r;
  r.class_id = 1;
  r.mu_min = 33.09;
  r.sigma_min = 3.31;
  r.mu_max = 52.73;
  r.sigma_max = 1.88;
  return r;
}

VolumeF constant_scores(Shape3 shape, float value) {
  return make_volume<float>(shape, {1, 1, 1}, Semantic::scores3d, value);
}

}  // namespace

TEST_CASE("dice basics") {
  auto a = make_volume<std::uint8_t>({2, 2, 2}, {1, 1, 1}, Semantic::prediction, 1);
  auto b = make_volume<std::uint8_t>({2, 2, 2}, {1, 1, 1}, Semantic::label, 1);
  CHECK(dice(a, b) == 1.0);

  b.data.setZero();
  b.data[0] = 1;
  a.data.setZero();
  a.data[1] = 1;
  CHECK(dice(a, b) == 0.0);

  // |A| = |B| = 4, overlap 2 -> 0.5
  a.data.setZero();
  b.data.setZero();
  for (Index i = 0; i < 4; ++i) a.data[i] = 1;
  for (Index i = 2; i < 6; ++i) b.data[i] = 1;
  CHECK(dice(a, b) == doctest::Approx(0.5).epsilon(1e-15));

  SUBCASE("both empty = 1 by convention") {
    a.data.setZero();
    b.data.setZero();
    CHECK(dice(a, b) == 1.0);
  }
  SUBCASE("symmetry and range on random masks") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto m1 = testutil::random_mask({4, 4, 4}, seed, 0.4);
      const auto m2 = testutil::random_mask({4, 4, 4}, seed + 77, 0.4);
      const double d12 = dice(m1, m2);
      CHECK(d12 == dice(m2, m1));
      CHECK(d12 >= 0.0);
      CHECK(d12 <= 1.0);
    }
  }
  SUBCASE("shape mismatch") {
    const auto small = make_volume<std::uint8_t>({1, 2, 2}, {1, 1, 1}, Semantic::label, 0);
    CHECK_THROWS_AS(dice(a, small), ValidationError);
  }
}

TEST_CASE("fp_analysis thresholds component volume in mm3") {
  const auto r = liver_region();

  // 1000 voxels at 1 mm3 each: exactly at the default threshold, so counted
  auto pred = make_volume<std::uint8_t>({10, 10, 10}, {1, 1, 1}, Semantic::prediction, 1);
  const auto scores = constant_scores({10, 10, 10}, 80.0f);
  const auto rep = fp_analysis(pred, scores, r);
  REQUIRE(rep.components.size() == 1);
  CHECK(rep.components[0].volume_mm3 == doctest::Approx(1000.0));
  CHECK(rep.components[0].out_of_region);
  CHECK(rep.n_out_of_region == 1);

  SUBCASE("999 mm3 is excluded") {
    pred.data[0] = 0;  // 999 voxels
    const auto below = fp_analysis(pred, scores, r);
    CHECK(below.components.empty());
    CHECK(below.n_out_of_region == 0);
  }
  SUBCASE("component at score 40 is in-region") {
    const auto inside = fp_analysis(pred, constant_scores({10, 10, 10}, 40.0f), r);
    REQUIRE(inside.components.size() == 1);
    CHECK_FALSE(inside.components[0].out_of_region);
    CHECK(inside.n_in_region == 1);
  }
  SUBCASE("margin widens the accepted interval") {
    // median 56: outside at margin 0 (S_max 52.73), inside at margin 2 (56.49)
    const auto near = fp_analysis(pred, constant_scores({10, 10, 10}, 56.0f), r, 1000.0, 0.0);
    CHECK(near.n_out_of_region == 1);
    const auto wide = fp_analysis(pred, constant_scores({10, 10, 10}, 56.0f), r, 1000.0, 2.0);
    CHECK(wide.n_out_of_region == 0);
  }
}

TEST_CASE("fp_analysis medians use the per-component score distribution") {
  const Shape3 shape{6, 1, 1};
  auto pred = make_volume<std::uint8_t>(shape, {10, 10, 10}, Semantic::prediction, 1);
  auto scores = make_volume<float>(shape, {10, 10, 10}, Semantic::scores3d);
  scores.data << 40.0f, 41.0f, 42.0f, 43.0f, 80.0f, 90.0f;
  // one component of 6 voxels, median (42+43)/2 = 42.5 -> in region
  const auto rep = fp_analysis(pred, scores, liver_region(), 100.0);
  REQUIRE(rep.components.size() == 1);
  CHECK(rep.components[0].median_score == doctest::Approx(42.5));
  CHECK(rep.n_in_region == 1);
}

TEST_CASE("fp_reduction reproduces the 91 -> 13 = 85.7% reference point") {
  FPReport a, b;
  a.class_id = b.class_id = 1;
  a.n_out_of_region = 91;
  b.n_out_of_region = 13;
  const auto red = fp_reduction(a, b);
  REQUIRE(red.has_value());
  CHECK(*red == doctest::Approx(85.7).epsilon(1e-3));

  SUBCASE("no change = 0%") {
    b.n_out_of_region = 91;
    CHECK(*fp_reduction(a, b) == doctest::Approx(0.0));
  }
  SUBCASE("to zero = 100%") {
    b.n_out_of_region = 0;
    CHECK(*fp_reduction(a, b) == doctest::Approx(100.0));
  }
  SUBCASE("reference without out-of-region components is not applicable") {
    a.n_out_of_region = 0;
    CHECK_FALSE(fp_reduction(a, b).has_value());
  }
  SUBCASE("class mismatch is an error") {
    b.class_id = 2;
    CHECK_THROWS_AS(fp_reduction(a, b), ValidationError);
  }
}

TEST_CASE("fp_analysis totals are stable under component relabeling") {
  // relabeling = flipping the volume, which renumbers components
  const auto r = liver_region();
  auto pred = make_volume<std::uint8_t>({4, 1, 8}, {10, 10, 10}, Semantic::prediction, 0);
  pred.data[0] = pred.data[1] = 1;
  pred.data[6] = pred.data[7] = 1;
  auto scores = make_volume<float>({4, 1, 8}, {10, 10, 10}, Semantic::scores3d, 40.0f);
  for (Index i = 4; i < 8; ++i) scores.data[i] = 90.0f;

  const auto rep = fp_analysis(pred, scores, r, 1000.0);
  VolumeU8 flipped_pred = pred;
  VolumeF flipped_scores = scores;
  std::reverse(flipped_pred.data.data(), flipped_pred.data.data() + flipped_pred.data.size());
  std::reverse(flipped_scores.data.data(),
               flipped_scores.data.data() + flipped_scores.data.size());
  const auto rep2 = fp_analysis(flipped_pred, flipped_scores, r, 1000.0);
  CHECK(rep.n_in_region == rep2.n_in_region);
  CHECK(rep.n_out_of_region == rep2.n_out_of_region);
}

TEST_CASE("bootstrap ranking: dominant and tied fixtures") {
  SUBCASE("a strictly dominant algorithm is always rank 1") {
    Eigen::MatrixXd scores(5, 3);
    scores << 0.9, 0.5, 0.4,
              0.8, 0.6, 0.3,
              0.95, 0.55, 0.5,
              0.85, 0.45, 0.35,
              0.9, 0.5, 0.45;
    const auto t = bootstrap_ranking(scores, {"a", "b", "c"}, 500, 7);
    CHECK(t.rank_frequency[0].at(1.0) == doctest::Approx(1.0));
    CHECK(t.median_rank[0] == 1.0);
    CHECK(t.median_rank[1] == 2.0);
    CHECK(t.median_rank[2] == 3.0);
  }
  SUBCASE("identical algorithms tie at rank 1.5") {
    Eigen::MatrixXd scores(4, 2);
    scores << 0.7, 0.7,
              0.6, 0.6,
              0.8, 0.8,
              0.75, 0.75;
    const auto t = bootstrap_ranking(scores, {"a", "b"}, 200, 3);
    CHECK(t.median_rank[0] == doctest::Approx(1.5));
    CHECK(t.median_rank[1] == doctest::Approx(1.5));
    CHECK(t.rank_frequency[0].at(1.5) == doctest::Approx(1.0));
  }
}

TEST_CASE("bootstrap ranking matches an independent reimplementation") {
  Rng rng(99);
  Eigen::MatrixXd scores(5, 3);
  for (Index i = 0; i < scores.size(); ++i) scores.data()[i] = rng.uniform();
  const auto t = bootstrap_ranking(scores, {"a", "b", "c"}, 300, 7);
  const auto expect = oracle::bootstrap_rank(scores, 300, 7);
  for (std::size_t a = 0; a < 3; ++a) {
    CHECK(t.median_rank[a] == expect.median[a]);
    REQUIRE(t.rank_frequency[a].size() == expect.frequency[a].size());
    for (const auto& [rank, freq] : expect.frequency[a]) {
      CHECK(t.rank_frequency[a].at(rank) == doctest::Approx(freq).epsilon(1e-12));
    }
  }
}

TEST_CASE("bootstrap ranking invariants and validation") {
  Rng rng(123);
  Eigen::MatrixXd scores(6, 4);
  for (Index i = 0; i < scores.size(); ++i) scores.data()[i] = rng.uniform();

  const auto t = bootstrap_ranking(scores, {"a", "b", "c", "d"}, 250, 11);
  for (std::size_t a = 0; a < 4; ++a) {
    double total = 0.0;
    for (const auto& [rank, f] : t.rank_frequency[a]) {
      CHECK(rank >= 1.0);
      CHECK(rank <= 4.0);
      total += f;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.median_rank[a] >= 1.0);
    CHECK(t.median_rank[a] <= 4.0);
  }

  const auto t2 = bootstrap_ranking(scores, {"a", "b", "c", "d"}, 250, 11);
  CHECK(t2.median_rank == t.median_rank);

  Eigen::MatrixXd bad = scores;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bootstrap_ranking(bad, {"a", "b", "c", "d"}, 10, 1), ValidationError);
  CHECK_THROWS_AS(bootstrap_ranking(scores.leftCols(1), {"a"}, 10, 1), ValidationError);
}
