#include <doctest.h>

#include <cmath>

#include "budgetalloc/gradest.hpp"
#include "budgetalloc/rng.hpp"

using namespace budgetalloc;

namespace {

PredictionPair random_pred(Eigen::Index rows, Eigen::Index cols,
                           std::uint64_t seed) {
  RngStream rng(seed);
  PredictionPair p;
  p.v.resize(rows, cols);
  p.c.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      p.v(i, j) = rng.uniform(0.2, 0.8);
      p.c(i, j) = rng.uniform(0.5, 2.0);
    }
  return p;
}

}  // namespace

TEST_CASE("finite differences on a quadratic recover the analytic gradient") {
  const PredictionPair pred = random_pred(6, 3, 1);
  const QFunction q = [](const Eigen::MatrixXd& v, const Eigen::MatrixXd&) {
    return v.array().square().sum();
  };
  FdParams params;
  params.h = 1e-3;
  params.num_entries = 18;  // all of B*K
  params.seed = 5;
  const GradEstimate est = estimate_grad_fd(q, pred, params, Wrt::kResponse);
  CHECK(est.evaluations_used == 36);
  const Eigen::MatrixXd expected = 2.0 * pred.v;
  const double rel = (est.grad_v - expected).cwiseAbs().maxCoeff() /
                     expected.cwiseAbs().maxCoeff();
  CHECK(rel < 1e-4);
  CHECK(est.grad_c.isZero(0.0));
}

TEST_CASE("finite difference masking") {
  const PredictionPair pred = random_pred(5, 4, 2);
  const QFunction q = [](const Eigen::MatrixXd& v, const Eigen::MatrixXd&) {
    return v.sum();
  };
  SUBCASE("a single sampled entry") {
    FdParams params;
    params.h = 1e-3;
    params.num_entries = 1;
    params.seed = 11;
    const GradEstimate est = estimate_grad_fd(q, pred, params, Wrt::kResponse);
    CHECK(est.evaluations_used == 2);
    int nonzero = 0;
    for (Eigen::Index i = 0; i < est.grad_v.rows(); ++i)
      for (Eigen::Index j = 0; j < est.grad_v.cols(); ++j)
        if (est.grad_v(i, j) != 0.0) ++nonzero;
    CHECK(nonzero == 1);
  }
  SUBCASE("mask cardinality and reproducibility") {
    FdParams params;
    params.h = 1e-3;
    params.num_entries = 7;
    params.seed = 13;
    const GradEstimate a = estimate_grad_fd(q, pred, params, Wrt::kResponse);
    const GradEstimate b = estimate_grad_fd(q, pred, params, Wrt::kResponse);
    CHECK(a.grad_v == b.grad_v);
    int nonzero = 0;
    for (Eigen::Index i = 0; i < a.grad_v.rows(); ++i)
      for (Eigen::Index j = 0; j < a.grad_v.cols(); ++j)
        if (a.grad_v(i, j) != 0.0) ++nonzero;
    CHECK(nonzero == 7);  // linear q: every sampled entry is exactly 1
  }
  SUBCASE("constant function gives a zero matrix") {
    const QFunction flat = [](const Eigen::MatrixXd&, const Eigen::MatrixXd&) {
      return 3.5;
    };
    FdParams params;
    params.num_entries = 10;
    params.seed = 1;
    const GradEstimate est =
        estimate_grad_fd(flat, pred, params, Wrt::kResponse);
    CHECK(est.grad_v.isZero(0.0));
  }
  SUBCASE("parameter validation") {
    FdParams bad;
    bad.h = 0.0;
    CHECK_THROWS_AS(estimate_grad_fd(q, pred, bad, Wrt::kResponse),
                    InvalidParams);
    FdParams too_many;
    too_many.num_entries = 21;
    CHECK_THROWS_AS(estimate_grad_fd(q, pred, too_many, Wrt::kResponse),
                    InvalidParams);
  }
}

TEST_CASE("finite differences never modify the caller's prediction") {
  const PredictionPair pred = random_pred(4, 2, 3);
  const Eigen::MatrixXd v_before = pred.v;
  const Eigen::MatrixXd c_before = pred.c;
  const QFunction q = [](const Eigen::MatrixXd& v, const Eigen::MatrixXd& c) {
    return v.sum() - c.sum();
  };
  FdParams params;
  params.num_entries = 8;
  estimate_grad_fd(q, pred, params, Wrt::kResponse);
  estimate_grad_fd(q, pred, params, Wrt::kCost);
  NesParams nes;
  nes.num_directions = 8;
  estimate_grad_nes(q, pred, nes, Wrt::kResponse);
  CHECK(pred.v == v_before);
  CHECK(pred.c == c_before);
}

TEST_CASE("NES estimate of a constant is exactly zero") {
  const PredictionPair pred = random_pred(8, 4, 4);
  const QFunction q = [](const Eigen::MatrixXd&, const Eigen::MatrixXd&) {
    return 0.731;
  };
  NesParams params;
  params.sigma = 1e-3;
  params.num_directions = 64;
  params.seed = 21;
  const GradEstimate est = estimate_grad_nes(q, pred, params, Wrt::kResponse);
  CHECK(est.grad_v.isZero(0.0));
  CHECK(est.evaluations_used == 64);
}

TEST_CASE("NES is unbiased for linear functions") {
  const Eigen::MatrixXd g = [] {
    Eigen::MatrixXd m(3, 2);
    m << 0.3, -1.2, 0.8, 0.05, -0.4, 1.0;
    return m;
  }();
  PredictionPair pred;
  pred.v = Eigen::MatrixXd::Constant(3, 2, 0.5);
  pred.c = Eigen::MatrixXd::Constant(3, 2, 1.0);
  const QFunction q = [&g](const Eigen::MatrixXd& v, const Eigen::MatrixXd&) {
    return (g.array() * v.array()).sum();
  };

  const int runs = 100;
  NesParams params;
  params.sigma = 1e-3;
  params.num_directions = 200;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 2);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(3, 2);
  for (int r = 0; r < runs; ++r) {
    params.seed = 1000 + static_cast<std::uint64_t>(r);
    const GradEstimate est = estimate_grad_nes(q, pred, params, Wrt::kResponse);
    sum += est.grad_v;
    sum_sq += est.grad_v.cwiseProduct(est.grad_v);
  }
  const Eigen::MatrixXd mean = sum / runs;
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const double variance =
          sum_sq(i, j) / runs - mean(i, j) * mean(i, j);
      const double se = std::sqrt(variance / runs);
      CHECK(std::abs(mean(i, j) - g(i, j)) < 2.0 * se + 1e-9);
    }
}

TEST_CASE("NES antithetic pairs cancel the affine offset") {
  PredictionPair pred;
  pred.v = Eigen::MatrixXd::Constant(4, 3, 0.5);
  pred.c = Eigen::MatrixXd::Constant(4, 3, 1.0);
  const Eigen::MatrixXd g = Eigen::MatrixXd::Random(4, 3);
  const QFunction linear = [&g](const Eigen::MatrixXd& v,
                                const Eigen::MatrixXd&) {
    return (g.array() * v.array()).sum();
  };
  const QFunction affine = [&g](const Eigen::MatrixXd& v,
                                const Eigen::MatrixXd&) {
    return 17.0 + (g.array() * v.array()).sum();
  };
  NesParams params;
  params.sigma = 1e-3;
  params.num_directions = 51;
  CHECK_THROWS_AS(estimate_grad_nes(linear, pred, params, Wrt::kResponse),
                  InvalidParams);  // odd direction counts are rejected
  params.num_directions = 64;
  params.seed = 3;
  const GradEstimate a = estimate_grad_nes(linear, pred, params, Wrt::kResponse);
  const GradEstimate b = estimate_grad_nes(affine, pred, params, Wrt::kResponse);
  CHECK((a.grad_v - b.grad_v).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("perturbations are clamped to the domain and counted") {
  PredictionPair pred;
  pred.v = Eigen::MatrixXd::Constant(2, 2, 1.0);  // already at the bound
  pred.c = Eigen::MatrixXd::Constant(2, 2, 0.0);
  const QFunction q = [](const Eigen::MatrixXd& v, const Eigen::MatrixXd& c) {
    CHECK((v.array() <= 1.0).all());
    CHECK((v.array() >= 0.0).all());
    CHECK((c.array() >= 0.0).all());
    return v.sum() + c.sum();
  };
  FdParams fd;
  fd.num_entries = 4;
  const GradEstimate est_v = estimate_grad_fd(q, pred, fd, Wrt::kResponse);
  CHECK(est_v.clamped_evaluations > 0);
  const GradEstimate est_c = estimate_grad_fd(q, pred, fd, Wrt::kCost);
  CHECK(est_c.clamped_evaluations > 0);
  NesParams nes;
  nes.num_directions = 16;
  const GradEstimate est_n = estimate_grad_nes(q, pred, nes, Wrt::kResponse);
  CHECK(est_n.clamped_evaluations > 0);
}

TEST_CASE("cosine similarity") {
  Eigen::MatrixXd a(1, 2);
  a << 1.0, 0.0;
  Eigen::MatrixXd b(1, 2);
  b << 0.0, 1.0;
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, Eigen::MatrixXd(-a)) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.0));
  CHECK_THROWS_AS(cosine_similarity(a, Eigen::MatrixXd::Zero(1, 2)),
                  ZeroVector);
  CHECK_THROWS_AS(cosine_similarity(a, Eigen::MatrixXd::Zero(2, 2)),
                  ShapeMismatch);
}
