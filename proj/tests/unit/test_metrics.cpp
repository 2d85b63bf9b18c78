#include <doctest.h>

#include <cmath>

#include "budgetalloc/metrics.hpp"
#include "budgetalloc/rng.hpp"
#include "budgetalloc/synthetic.hpp"

using namespace budgetalloc;

TEST_CASE("eom_at_budget wraps the bisection") {
  const SyntheticGroundTruth gt = generate_ground_truth(5000, 4, 61);
  const RctDataset ds = sample_rct(gt, 62);
  QEvalParams qp;
  const EomAtBudget eom = eom_at_budget({gt.v, gt.c}, full_batch(ds), 2.0, qp);
  CHECK(eom.response > 0.18);
  CHECK(eom.response < 0.25);
  CHECK(eom.converged);
  CHECK(std::abs(eom.cost - 2.0) <= 0.02);
}

TEST_CASE("aucc closed forms") {
  SUBCASE("diagonal scores one half") {
    CostCurve diag;
    diag.points.push_back({0.0, 0.0, 0.0});
    diag.points.push_back({0.5, 0.5, 0.5});
    diag.points.push_back({1.0, 1.0, 1.0});
    CHECK(aucc(diag) == doctest::Approx(0.5));
  }
  SUBCASE("early-lift curve") {
    CostCurve curve;
    curve.points.push_back({0.0, 0.0, 0.0});
    curve.points.push_back({0.5, 0.5, 1.0});
    curve.points.push_back({1.0, 1.0, 1.0});
    CHECK(aucc(curve) == doctest::Approx(0.75));
  }
  SUBCASE("degenerate curves are rejected") {
    CostCurve flat;
    flat.points.push_back({0.0, 0.0, 0.0});
    flat.points.push_back({1.0, 0.0, 1.0});
    CHECK_THROWS_AS(aucc(flat), DegenerateCurve);
    CostCurve single;
    single.points.push_back({0.0, 0.0, 0.0});
    CHECK_THROWS_AS(aucc(single), DegenerateCurve);
  }
}

TEST_CASE("aucc depends only on the ranking") {
  const auto [ds, gt] = generate_featured(8000, 2, 6, 63);
  std::vector<double> scores(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    scores[i] = gt.v(static_cast<Eigen::Index>(i), 1) -
                gt.v(static_cast<Eigen::Index>(i), 0);
  const double base = aucc(build_cost_curve(scores, ds));
  std::vector<double> warped = scores;
  for (double& s : warped) s = std::tanh(3.0 * s) + 5.0;  // monotone warp
  CHECK(aucc(build_cost_curve(warped, ds)) == doctest::Approx(base));
}

TEST_CASE("cost curve construction") {
  const auto [ds, gt] = generate_featured(6000, 2, 6, 64);

  SUBCASE("first point is the origin") {
    std::vector<double> scores(ds.size(), 0.0);
    RngStream rng(1);
    for (double& s : scores) s = rng.uniform01();
    const CostCurve curve = build_cost_curve(scores, ds);
    REQUIRE(curve.points.size() == 101);
    CHECK(curve.points.front().treated_fraction == 0.0);
    CHECK(curve.points.front().incremental_cost == 0.0);
    CHECK(curve.points.front().incremental_value == 0.0);
    CHECK(curve.points.back().treated_fraction == 1.0);
  }
  SUBCASE("needs two treatments") {
    const auto [ds4, gt4] = generate_featured(100, 4, 3, 65);
    CHECK_THROWS_AS(build_cost_curve(std::vector<double>(100, 0.5), ds4),
                    NotTwoTreatments);
  }
  SUBCASE("scores must match the dataset length") {
    CHECK_THROWS_AS(build_cost_curve(std::vector<double>(10, 0.5), ds),
                    ShapeMismatch);
  }
}

TEST_CASE("random scores sit near one half, oracle scores above") {
  const auto [ds, gt] = generate_featured(20000, 2, 8, 66);

  double random_sum = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    RngStream rng(100 + static_cast<std::uint64_t>(s));
    std::vector<double> scores(ds.size());
    for (double& x : scores) x = rng.uniform01();
    random_sum += aucc(build_cost_curve(scores, ds));
  }
  const double random_mean = random_sum / seeds;
  CHECK(std::abs(random_mean - 0.5) < 0.05);

  // Oracle: true uplift over true cost uplift (cost gap is exactly 1).
  std::vector<double> oracle(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    oracle[i] = (gt.v(static_cast<Eigen::Index>(i), 1) -
                 gt.v(static_cast<Eigen::Index>(i), 0)) /
                (gt.c(static_cast<Eigen::Index>(i), 1) -
                 gt.c(static_cast<Eigen::Index>(i), 0));
  const double oracle_aucc = aucc(build_cost_curve(oracle, ds));
  CHECK(oracle_aucc > random_mean + 0.05);
}

TEST_CASE("uplift ratio scores") {
  PredictionPair pred;
  pred.v.resize(2, 2);
  pred.c.resize(2, 2);
  pred.v << 0.1, 0.3, 0.2, 0.25;
  pred.c << 1.0, 2.0, 1.0, 1.5;
  const std::vector<double> scores = uplift_ratio_scores(pred);
  CHECK(scores[0] == doctest::Approx(0.2));
  CHECK(scores[1] == doctest::Approx(0.1));
  PredictionPair three;
  three.v = Eigen::MatrixXd::Zero(2, 3);
  three.c = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(uplift_ratio_scores(three), NotTwoTreatments);
}
