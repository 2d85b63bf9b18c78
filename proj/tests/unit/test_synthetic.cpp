#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "budgetalloc/synthetic.hpp"

using namespace budgetalloc;

TEST_CASE("ground truth rows satisfy the shape constraints") {
  const SyntheticGroundTruth gt = generate_ground_truth(10000, 4, 42);
  REQUIRE(gt.size() == 10000);
  REQUIRE(gt.num_treatments() == 4);
  for (Eigen::Index i = 0; i < gt.v.rows(); ++i) {
    CHECK(gt.v(i, 0) >= 0.0);
    CHECK(gt.v(i, 0) <= 0.1);
    double prev_increment = 0.2;
    for (int j = 1; j < 4; ++j) {
      const double inc = gt.v(i, j) - gt.v(i, j - 1);
      CHECK(inc >= 0.0);
      CHECK(inc <= 0.2);
      CHECK(inc <= prev_increment + 1e-15);
      prev_increment = inc;
    }
    for (int j = 0; j < 4; ++j) CHECK(gt.c(i, j) == static_cast<double>(j + 1));
  }
}

TEST_CASE("ground truth base level has the right mean") {
  const SyntheticGroundTruth gt = generate_ground_truth(100000, 4, 9);
  const double mean = gt.v.col(0).mean();
  CHECK(mean == doctest::Approx(0.05).epsilon(0.04));
  CHECK(std::abs(mean - 0.05) < 0.002);
}

TEST_CASE("ground truth generation is deterministic and validates K") {
  const SyntheticGroundTruth a = generate_ground_truth(500, 4, 7);
  const SyntheticGroundTruth b = generate_ground_truth(500, 4, 7);
  CHECK(a.v == b.v);
  const SyntheticGroundTruth c = generate_ground_truth(500, 4, 8);
  CHECK(a.v != c.v);
  CHECK_THROWS_AS(generate_ground_truth(10, 1, 0), InvalidK);
}

TEST_CASE("sample_rct") {
  SUBCASE("degenerate probabilities give degenerate outcomes") {
    SyntheticGroundTruth gt;
    gt.v = Eigen::MatrixXd::Zero(50, 3);
    gt.c.resize(50, 3);
    for (int j = 0; j < 3; ++j) gt.c.col(j).setConstant(j + 1.0);
    const RctDataset ds = sample_rct(gt, 4);
    for (int y : ds.responses) CHECK(y == 0);
  }
  SUBCASE("treatments are uniform and costs match the assignment") {
    const SyntheticGroundTruth gt = generate_ground_truth(100000, 4, 21);
    const RctDataset ds = sample_rct(gt, 22);
    CHECK(ds.feature_dim() == 0);
    std::vector<std::size_t> arm_count(4, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      arm_count[static_cast<std::size_t>(ds.treatments[i])]++;
      CHECK(ds.costs[i] ==
            gt.c(static_cast<Eigen::Index>(i), ds.treatments[i]));
    }
    for (std::size_t arm = 0; arm < 4; ++arm) {
      const double freq =
          static_cast<double>(arm_count[arm]) / static_cast<double>(ds.size());
      CHECK(std::abs(freq - 0.25) < 0.01);
    }
  }
  SUBCASE("arm response means are unbiased for the ground truth") {
    const SyntheticGroundTruth gt = generate_ground_truth(100000, 4, 31);
    const RctDataset ds = sample_rct(gt, 32);
    for (int arm = 0; arm < 4; ++arm) {
      double sum_y = 0.0, sum_p = 0.0;
      std::size_t m = 0;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.treatments[i] != arm) continue;
        sum_y += ds.responses[i];
        sum_p += gt.v(static_cast<Eigen::Index>(i), arm);
        ++m;
      }
      const double observed = sum_y / static_cast<double>(m);
      const double expected = sum_p / static_cast<double>(m);
      const double se =
          std::sqrt(expected * (1.0 - expected) / static_cast<double>(m));
      CHECK(std::abs(observed - expected) < 3.0 * se);
    }
  }
}

TEST_CASE("featured generator") {
  const auto [ds, gt] = generate_featured(2000, 4, 8, 77);
  CHECK(ds.feature_dim() == 8);
  CHECK(ds.size() == 2000);

  SUBCASE("bit-identical on replay") {
    const auto [ds2, gt2] = generate_featured(2000, 4, 8, 77);
    CHECK(ds2.features == ds.features);
    CHECK(ds2.treatments == ds.treatments);
    CHECK(ds2.responses == ds.responses);
    CHECK(gt2.v == gt.v);
  }
  SUBCASE("rows obey the featureless generator's constraints") {
    for (Eigen::Index i = 0; i < gt.v.rows(); ++i) {
      CHECK(gt.v(i, 0) >= 0.0);
      CHECK(gt.v(i, 0) <= 0.1);
      double prev = 0.2;
      for (int j = 1; j < 4; ++j) {
        const double inc = gt.v(i, j) - gt.v(i, j - 1);
        CHECK(inc >= 0.0);
        CHECK(inc <= 0.2 + 1e-15);
        CHECK(inc <= prev + 1e-15);
        prev = inc;
      }
    }
  }
  SUBCASE("responses vary with features") {
    // The map has to produce a learnable signal, not a constant.
    const double sd = std::sqrt(
        (gt.v.col(3).array() - gt.v.col(3).mean()).square().mean());
    CHECK(sd > 0.03);
  }
  SUBCASE("argument validation") {
    CHECK_THROWS_AS(generate_featured(10, 1, 4, 0), InvalidK);
    CHECK_THROWS_AS(generate_featured(10, 4, 0, 0), ZeroFeatureDim);
  }
}

TEST_CASE("ground truth sidecar round trip") {
  const SyntheticGroundTruth gt = generate_ground_truth(64, 4, 5);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ba_gt_sidecar.csv").string();
  save_ground_truth(gt, path);
  const SyntheticGroundTruth loaded = load_ground_truth(path);
  CHECK(loaded.v == gt.v);
  CHECK(loaded.c == gt.c);
  std::remove(path.c_str());
}
