#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <tuple>

#include "budgetalloc/dataset.hpp"
#include "budgetalloc/rng.hpp"
#include "budgetalloc/synthetic.hpp"

using namespace budgetalloc;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::remove(path.c_str()); }
  void write(const std::string& content) {
    std::ofstream out(path);
    out << content;
  }
};

}  // namespace

TEST_CASE("load_dataset basics") {
  TempFile f("ba_basic.csv");
  f.write("x0,x1,treatment,response,cost\n"
          "0.5,1.5,1,0,0.0\n"
          "-1.0,2.0,2,1,2.0\n");
  const RctDataset ds = load_dataset(f.path);
  CHECK(ds.size() == 2);
  CHECK(ds.num_treatments == 2);
  CHECK(ds.feature_dim() == 2);
  CHECK(ds.treatments == std::vector<int>{0, 1});  // 1-based on disk
  CHECK(ds.responses == std::vector<int>{0, 1});
  CHECK(ds.costs == std::vector<double>{0.0, 2.0});
  CHECK(ds.features(1, 0) == -1.0);
}

TEST_CASE("load_dataset errors") {
  SUBCASE("negative cost") {
    TempFile f("ba_negcost.csv");
    f.write("treatment,response,cost\n1,0,-1\n");
    CHECK_THROWS_AS(load_dataset(f.path), NegativeCost);
  }
  SUBCASE("non-binary response") {
    TempFile f("ba_badresp.csv");
    f.write("treatment,response,cost\n1,2,0\n");
    CHECK_THROWS_AS(load_dataset(f.path), NonBinaryResponse);
  }
  SUBCASE("treatment above the pinned K") {
    TempFile f("ba_badtreat.csv");
    f.write("treatment,response,cost\n5,0,0\n");
    DatasetSchema schema;
    schema.num_treatments = 3;
    CHECK_THROWS_AS(load_dataset(f.path, schema), TreatmentOutOfRange);
  }
  SUBCASE("missing column") {
    TempFile f("ba_nocol.csv");
    f.write("treatment,cost\n1,0\n");
    CHECK_THROWS_AS(load_dataset(f.path), MissingColumn);
  }
  SUBCASE("empty") {
    TempFile f("ba_empty.csv");
    f.write("treatment,response,cost\n");
    CHECK_THROWS_AS(load_dataset(f.path), EmptyDataset);
  }
  SUBCASE("garbage is rejected, not skipped") {
    TempFile f("ba_garbage.csv");
    f.write("treatment,response,cost\n1,0,zero\n");
    CHECK_THROWS_AS(load_dataset(f.path), ParseFailure);
  }
}

TEST_CASE("rows with missing values are excluded and counted") {
  TempFile f("ba_missing.csv");
  f.write("x0,treatment,response,cost\n"
          "0.5,1,0,1.0\n"
          ",1,1,1.0\n"
          "0.25,2,1,\n"
          "1.5,2,1,2.0\n");
  LoadReport report;
  const RctDataset ds = load_dataset(f.path, {}, &report);
  CHECK(ds.size() == 2);
  CHECK(report.rows_loaded == 2);
  CHECK(report.rows_with_missing_values == 2);
}

TEST_CASE("uplift-log column mapping with 12 dense features") {
  // Layout of the public uplift benchmark: 12 dense features, a 0/1
  // treatment flag, conversion as the response and visit as the cost.
  TempFile f("ba_uplift.csv");
  {
    std::ofstream out(f.path);
    for (int j = 0; j < 12; ++j) out << 'f' << j << ',';
    out << "treatment,conversion,visit,exposure\n";
    RngStream rng(3);
    for (int i = 0; i < 1000; ++i) {
      for (int j = 0; j < 12; ++j) out << rng.uniform(-2.0, 2.0) << ',';
      out << rng.uniform_int(2) << ',' << rng.uniform_int(2) << ','
          << rng.uniform_int(2) << ',' << rng.uniform_int(2) << '\n';
    }
  }
  DatasetSchema schema;
  schema.response_column = "conversion";
  schema.cost_column = "visit";
  schema.zero_based_treatments = true;
  for (int j = 0; j < 12; ++j)
    schema.feature_columns.push_back("f" + std::to_string(j));
  const RctDataset ds = load_dataset(f.path, schema);
  CHECK(ds.size() == 1000);
  CHECK(ds.num_treatments == 2);
  CHECK(ds.feature_dim() == 12);
}

TEST_CASE("save/load round trip") {
  const auto [ds, gt] = generate_featured(60, 3, 4, 11);
  for (const char* mode : {"columns", "packed"}) {
    DatasetSchema schema;
    if (std::string(mode) == "packed") schema.packed_feature_column = "features";
    TempFile f(std::string("ba_roundtrip_") + mode + ".csv");
    save_dataset(ds, f.path, schema);
    const RctDataset loaded = load_dataset(f.path, schema);
    CHECK(loaded.size() == ds.size());
    CHECK(loaded.num_treatments == ds.num_treatments);
    CHECK(loaded.treatments == ds.treatments);
    CHECK(loaded.responses == ds.responses);
    CHECK(loaded.costs == ds.costs);
    CHECK(loaded.features == ds.features);
  }
}

TEST_CASE("split") {
  const auto [ds, gt] = generate_featured(10, 2, 2, 5);
  const auto [a, b] = split(ds, 0.7, 1);
  CHECK(a.size() == 7);
  CHECK(b.size() == 3);

  SUBCASE("deterministic") {
    const auto [a2, b2] = split(ds, 0.7, 1);
    CHECK(a2.treatments == a.treatments);
    CHECK(a2.features == a.features);
    CHECK(b2.costs == b.costs);
  }
  SUBCASE("partition is a permutation of the original") {
    std::multiset<double> original, combined;
    for (std::size_t i = 0; i < ds.size(); ++i)
      original.insert(ds.features(static_cast<Eigen::Index>(i), 0));
    for (std::size_t i = 0; i < a.size(); ++i)
      combined.insert(a.features(static_cast<Eigen::Index>(i), 0));
    for (std::size_t i = 0; i < b.size(); ++i)
      combined.insert(b.features(static_cast<Eigen::Index>(i), 0));
    CHECK(original == combined);
  }
  SUBCASE("ceiling rule can leave an empty, valid remainder") {
    const auto [ds3, gt3] = generate_featured(3, 2, 2, 5);
    const auto [big, empty] = split(ds3, 0.999, 9);
    CHECK(big.size() == 3);
    CHECK(empty.size() == 0);
    CHECK(empty.num_treatments == ds3.num_treatments);
  }
  SUBCASE("empty input") {
    RctDataset none;
    none.features.resize(0, 2);
    CHECK_THROWS_AS(split(none, 0.5, 1), EmptyDataset);
  }
}

TEST_CASE("batches") {
  SyntheticGroundTruth gt = generate_ground_truth(2500, 4, 17);
  const RctDataset ds = sample_rct(gt, 18);
  const auto bs = batches(ds, 1000, 3);
  REQUIRE(bs.size() == 3);
  CHECK(bs[0].size() == 1000);
  CHECK(bs[1].size() == 1000);
  CHECK(bs[2].size() == 500);

  SUBCASE("each sample appears exactly once per epoch") {
    std::multiset<std::tuple<int, int, double>> original, emitted;
    for (std::size_t i = 0; i < ds.size(); ++i)
      original.insert({ds.treatments[i], ds.responses[i], ds.costs[i]});
    for (const RctBatch& b : bs)
      for (std::size_t i = 0; i < b.size(); ++i)
        emitted.insert({b.treatments[i], b.responses[i], b.costs[i]});
    CHECK(original == emitted);
  }
  SUBCASE("fixed seed reproduces the order") {
    const auto again = batches(ds, 1000, 3);
    for (std::size_t k = 0; k < bs.size(); ++k)
      CHECK(again[k].treatments == bs[k].treatments);
  }
  SUBCASE("different seeds reshuffle") {
    const auto other = batches(ds, 1000, 4);
    CHECK(other[0].treatments != bs[0].treatments);
  }
}

TEST_CASE("standardize_features") {
  RctDataset ds;
  ds.features.resize(3, 2);
  ds.features << 1.0, 0.0, 1.0, 2.0, 1.0, 4.0;
  ds.treatments = {0, 0, 0};
  ds.responses = {0, 1, 0};
  ds.costs = {1.0, 1.0, 1.0};

  const auto [transform, standardized] = standardize_features(ds);

  SUBCASE("constant column maps to zero") {
    CHECK(standardized.features.col(0).isZero(0.0));
  }
  SUBCASE("mean zero, unit variance") {
    const auto col = standardized.features.col(1);
    CHECK(col.mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(col.squaredNorm() / 3.0 == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two-point column lands on -1, 1") {
    RctDataset two;
    two.features.resize(2, 1);
    two.features << 0.0, 2.0;
    two.treatments = {0, 0};
    two.responses = {0, 0};
    two.costs = {0.0, 0.0};
    const auto [t2, s2] = standardize_features(two);
    CHECK(s2.features(0, 0) == doctest::Approx(-1.0));
    CHECK(s2.features(1, 0) == doctest::Approx(1.0));
  }
  SUBCASE("held-out data uses training statistics") {
    Eigen::MatrixXd test(1, 2);
    test << 7.0, 2.0;
    const Eigen::MatrixXd mapped = transform.apply(test);
    // Train stats: col1 mean 2, std sqrt(8/3).
    CHECK(mapped(0, 1) == doctest::Approx((2.0 - 2.0) / std::sqrt(8.0 / 3.0)));
    CHECK(mapped(0, 0) == 0.0);
  }
  SUBCASE("inverse recovers non-degenerate columns") {
    Eigen::MatrixXd pts(2, 1);
    pts << -0.3, 1.7;
    FeatureTransform t;
    t.mean.resize(1);
    t.scale.resize(1);
    t.mean << 4.0;
    t.scale << 0.5;
    const Eigen::MatrixXd back = t.inverse(t.apply(pts));
    CHECK((back - pts).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("featureless dataset is rejected") {
    RctDataset bare;
    bare.features.resize(2, 0);
    bare.treatments = {0, 0};
    bare.responses = {0, 0};
    bare.costs = {0.0, 0.0};
    CHECK_THROWS_AS(standardize_features(bare), ZeroFeatureDim);
  }
}
