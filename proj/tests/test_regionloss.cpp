#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bodyreg/regionloss.hpp"
#include "bodyreg/transforms.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace bodyreg;

namespace {

ClassRegion liver_like() {
  ClassRegion r;
  r.class_id = 1;
  r.mu_min = 33.09;
  r.sigma_min = 3.31;
  r.mu_max = 52.73;
  r.sigma_max = 1.88;
  r.offset_n = 0.0;
  return r;
}

}  // namespace

TEST_CASE("weight is zero inside the valid interval") {
  const auto r = liver_like();
  CHECK(region_weight(40.0, r) == 0.0);
  CHECK(region_weight(33.09, r) == 0.0);
  CHECK(region_weight(52.73, r) == 0.0);
}

TEST_CASE("weight one sigma outside the boundary is 1 - exp(-1/2)") {
  const auto r = liver_like();
  const double expected = 1.0 - std::exp(-0.5);  // 0.3934693402873666
  CHECK(region_weight(r.s_min() - r.sigma_min, r) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(region_weight(r.s_max() + r.sigma_max, r) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.3934693).epsilon(1e-7));
}

TEST_CASE("weight far outside saturates to 1 within 1e-15") {
  const auto r = liver_like();
  CHECK(std::abs(region_weight(r.s_max() + 10.0 * r.sigma_max, r) - 1.0) <= 1e-15);
}

TEST_CASE("weight respects the offset-widened interval") {
  auto r = liver_like();
  r.offset_n = 2.0;
  CHECK(region_weight(33.09 - 1.9 * 3.31, r) == 0.0);  // inside the widened interval
  CHECK(region_weight(33.09 - 2.1 * 3.31, r) > 0.0);
}

TEST_CASE("weight continuity across the boundary") {
  const auto r = liver_like();
  for (double base : {r.s_min(), r.s_max()}) {
    for (double d = -1e-6; d <= 1e-6; d += 1e-7) {
      CHECK(std::abs(region_weight(base + d, r)) <= 1e-5);
    }
  }
}

TEST_CASE("weight field applies pointwise and checks finiteness") {
  const auto r = liver_like();
  auto scores = make_volume<float>({2, 2, 2}, {1, 1, 1}, Semantic::scores3d);

  SUBCASE("all inside gives the zero field") {
    scores.data.setConstant(45.0f);
    const auto wf = weight_field(scores, r);
    CHECK((wf.weights.data == 0.0f).all());
  }
  SUBCASE("constant one-sigma-below field") {
    scores.data.setConstant(static_cast<float>(r.s_min() - r.sigma_min));
    const auto wf = weight_field(scores, r);
    for (Index i = 0; i < wf.weights.data.size(); ++i) {
      CHECK(wf.weights.data[i] == doctest::Approx(0.3934693).epsilon(1e-6));
    }
  }
  SUBCASE("non-finite scores are rejected") {
    scores.data[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(weight_field(scores, r), ValidationError);
  }
}

TEST_CASE("weight-field transform parity: flip and rotate commute with the field") {
  const auto r = liver_like();
  auto scores = make_volume<float>({4, 3, 5}, {1, 1, 1}, Semantic::scores3d);
  Rng rng(9);
  for (Index i = 0; i < scores.data.size(); ++i) {
    scores.data[i] = static_cast<float>(rng.uniform(0.0, 100.0));
  }
  const std::vector<SpatialTransform> ts = {FlipAxis{0}, FlipAxis{1}, FlipAxis{2},
                                            Rotate90{1, 2, 1}, Rotate90{0, 2, 3}};
  for (const auto& t : ts) {
    const auto field_then_transform = apply_transform(weight_field(scores, r).weights, t);
    const auto transform_then_field = weight_field(apply_transform(scores, t), r).weights;
    CHECK((field_then_transform.data == transform_then_field.data).all());
  }
}

TEST_CASE("wbce basics") {
  CHECK(wbce(0.7, 0.0) == 0.0);
  CHECK(wbce(0.0, 1.0) == 0.0);  // log(1) = 0 exactly
  CHECK(wbce(0.5, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(wbce(0.5, 1.0) == doctest::Approx(0.6931472).epsilon(1e-7));
  // monotone in yhat, finite at 1 thanks to the clamp
  CHECK(wbce(0.9, 1.0) > wbce(0.5, 1.0));
  CHECK(std::isfinite(wbce(1.0, 1.0)));
  CHECK(wbce(1.0, 1.0) == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
}

TEST_CASE("region_loss on the four-voxel example: M=2, value 0.7") {
  // weights 1 on all four voxels; yhat chosen so the wBCE values are
  // 0.1, 0.5, 0.3, 0.9 exactly
  Eigen::ArrayXd losses(4);
  losses << 0.1, 0.5, 0.3, 0.9;
  Eigen::ArrayXd yhat = 1.0 - (-losses).exp();
  Eigen::ArrayXd weights = Eigen::ArrayXd::Ones(4);

  const auto rep = region_loss(yhat, weights, 1.0, 50.0);
  CHECK(rep.n_invalid == 4);
  CHECK(rep.m_selected == 2);
  CHECK(rep.value == doctest::Approx(0.7).epsilon(1e-12));
  REQUIRE(rep.selected_indices.size() == 2);
  CHECK(rep.selected_indices[0] == 1);
  CHECK(rep.selected_indices[1] == 3);
  CHECK(rep.grad[0] == 0.0);
  CHECK(rep.grad[2] == 0.0);
  CHECK(rep.grad[1] > 0.0);
}

TEST_CASE("region_loss edge behavior") {
  Eigen::ArrayXd weights = Eigen::ArrayXd::Ones(6);

  SUBCASE("all-zero predictions give zero loss") {
    const auto rep = region_loss(Eigen::ArrayXd::Zero(6), weights, 1.0, 50.0);
    CHECK(rep.value == 0.0);
    CHECK(rep.n_invalid == 6);
  }
  SUBCASE("no invalid voxels give zero loss and M = 0") {
    Eigen::ArrayXd yhat = Eigen::ArrayXd::Constant(6, 0.9);
    const auto rep = region_loss(yhat, Eigen::ArrayXd::Zero(6), 1.0, 50.0);
    CHECK(rep.value == 0.0);
    CHECK(rep.m_selected == 0);
    CHECK(rep.n_invalid == 0);
  }
  SUBCASE("k=100 reduces to the mean over invalid voxels") {
    Eigen::ArrayXd yhat(6);
    yhat << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    const auto rep = region_loss(yhat, weights, 1.0, 100.0);
    double mean = 0.0;
    for (Index i = 0; i < 6; ++i) mean += wbce(yhat[i], 1.0);
    mean /= 6.0;
    CHECK(rep.value == doctest::Approx(mean).epsilon(1e-14));
    CHECK(rep.m_selected == 6);
  }
  SUBCASE("alpha scales the value exactly") {
    Eigen::ArrayXd yhat(6);
    yhat << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    const auto a1 = region_loss(yhat, weights, 1.0, 1.0);
    const auto a10 = region_loss(yhat, weights, 10.0, 1.0);
    CHECK(a10.value == 10.0 * a1.value);
  }
  SUBCASE("tiny invalid regions still select one voxel") {
    Eigen::ArrayXd yhat = Eigen::ArrayXd::Constant(3, 0.5);
    Eigen::ArrayXd w = Eigen::ArrayXd::Zero(3);
    w[1] = 0.4;
    const auto rep = region_loss(yhat, w, 1.0, 1.0);
    CHECK(rep.n_invalid == 1);
    CHECK(rep.m_selected == 1);
    CHECK(rep.value == doctest::Approx(0.4 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("ties at the M-th value break by ascending voxel index") {
    Eigen::ArrayXd yhat = Eigen::ArrayXd::Constant(4, 0.5);
    const auto rep = region_loss(yhat, weights.head(4), 1.0, 50.0);
    REQUIRE(rep.selected_indices.size() == 2);
    CHECK(rep.selected_indices[0] == 0);
    CHECK(rep.selected_indices[1] == 1);
  }
  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(region_loss(Eigen::ArrayXd::Zero(3), weights, 1.0, 50.0),
                    ValidationError);
  }
}

TEST_CASE("property: region_loss matches the sort oracle") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const Index n = 1 + static_cast<Index>(rng.uniform_index(300));
    Eigen::ArrayXd yhat(n), weights(n);
    for (Index i = 0; i < n; ++i) {
      yhat[i] = rng.uniform();
      weights[i] = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    }
    const double k = std::vector<double>{1.0, 5.0, 50.0, 100.0}[seed % 4];
    const auto rep = region_loss(yhat, weights, 1.0, k);
    const double expect = oracle::topk_region_loss(
        std::vector<double>(yhat.data(), yhat.data() + n),
        std::vector<double>(weights.data(), weights.data() + n), 1.0, k, kDefaultClampEps);
    CHECK(oracle::close_rel(rep.value, expect, 1e-12));
  }
}

TEST_CASE("property: raising an invalid-region prediction never lowers the loss") {
  Rng rng(3);
  Eigen::ArrayXd yhat(40), weights(40);
  for (Index i = 0; i < 40; ++i) {
    yhat[i] = rng.uniform(0.0, 0.95);
    weights[i] = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
  }
  const double base = region_loss(yhat, weights, 1.0, 25.0).value;
  for (Index i = 0; i < 40; ++i) {
    if (weights[i] <= 0.0) continue;
    Eigen::ArrayXd bumped = yhat;
    bumped[i] = std::min(1.0, yhat[i] + 0.04);
    CHECK(region_loss(bumped, weights, 1.0, 25.0).value >= base - 1e-15);
  }
}

TEST_CASE("property: analytic gradient matches central differences") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(seed + 1000);
    const Index n = 10 + static_cast<Index>(rng.uniform_index(40));
    Eigen::ArrayXd yhat(n), weights(n);
    for (Index i = 0; i < n; ++i) {
      yhat[i] = rng.uniform(0.05, 0.9);
      weights[i] = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.1, 1.0);
    }
    if ((weights > 0.0).count() == 0) continue;
    const double k = 50.0;
    const auto rep = region_loss(yhat, weights, 2.0, k);

    // skip configurations with a near-tie at the selection boundary
    std::vector<double> ls;
    for (Index i = 0; i < n; ++i) {
      if (weights[i] > 0.0) ls.push_back(wbce(yhat[i], weights[i]));
    }
    std::sort(ls.begin(), ls.end(), std::greater<>());
    const auto m = static_cast<std::size_t>(rep.m_selected);
    if (m < ls.size() && ls[m - 1] - ls[m] < 1e-3) continue;

    auto f = [&](const Eigen::ArrayXd& x) { return region_loss(x, weights, 2.0, k).value; };
    for (Index i = 0; i < n; ++i) {
      const double fd = oracle::central_difference(f, yhat, i);
      CHECK(oracle::close_rel(rep.grad[i], fd, 1e-4));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("property: weight Lipschitz bound from the sigma floor") {
  const auto r = liver_like();  // sigmas well above the floor
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const double boundary = i % 2 == 0 ? r.s_min() : r.s_max();
    const double s = boundary + rng.uniform(-3.0, 3.0);
    const double delta = rng.uniform(1e-9, 1e-3);
    const double lhs = std::abs(region_weight(s + delta, r) - region_weight(s, r));
    CHECK(lhs <= delta / kDefaultSigmaFloor + 1e-15);
  }
}
