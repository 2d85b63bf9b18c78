#include "budgetalloc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "budgetalloc/rng.hpp"

namespace budgetalloc {

namespace {

constexpr double kBaseMax = 0.1;
constexpr double kIncrementMax = 0.2;

Eigen::MatrixXd cost_matrix(std::size_t n, int k) {
  Eigen::MatrixXd c(n, k);
  for (int j = 0; j < k; ++j) c.col(j).setConstant(static_cast<double>(j + 1));
  return c;
}

/// Builds one ground-truth row from a base level and raw increments:
/// sort increments descending, then accumulate.
void fill_row(Eigen::MatrixXd& v, Eigen::Index i, double base,
              std::vector<double>& increments) {
  std::sort(increments.begin(), increments.end(), std::greater<double>());
  v(i, 0) = base;
  for (std::size_t j = 0; j < increments.size(); ++j)
    v(i, static_cast<Eigen::Index>(j + 1)) =
        v(i, static_cast<Eigen::Index>(j)) + increments[j];
}

}  // namespace

SyntheticGroundTruth generate_ground_truth(std::size_t n, int num_treatments,
                                           std::uint64_t seed) {
  if (num_treatments < 2) throw InvalidK("synthetic ground truth needs K >= 2");
  if (n < 1) throw EmptyDataset("n must be >= 1");

  SyntheticGroundTruth gt;
  gt.v.resize(static_cast<Eigen::Index>(n), num_treatments);
  gt.c = cost_matrix(n, num_treatments);

  std::vector<double> increments(static_cast<std::size_t>(num_treatments - 1));
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng = RngStream::derive(seed, "ground_truth", i);
    const double base = rng.uniform(0.0, kBaseMax);
    for (auto& inc : increments) inc = rng.uniform(0.0, kIncrementMax);
    fill_row(gt.v, static_cast<Eigen::Index>(i), base, increments);
  }
  return gt;
}

RctDataset sample_rct(const SyntheticGroundTruth& gt, std::uint64_t seed) {
  const std::size_t n = gt.size();
  const int k = gt.num_treatments();

  RctDataset ds;
  ds.num_treatments = k;
  ds.features.resize(static_cast<Eigen::Index>(n), 0);
  ds.treatments.resize(n);
  ds.responses.resize(n);
  ds.costs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream treatment_rng = RngStream::derive(seed, "treatments", i);
    RngStream outcome_rng = RngStream::derive(seed, "outcomes", i);
    const int t = static_cast<int>(treatment_rng.uniform_int(static_cast<std::uint64_t>(k)));
    const Eigen::Index ei = static_cast<Eigen::Index>(i);
    ds.treatments[i] = t;
    ds.responses[i] = outcome_rng.bernoulli(gt.v(ei, t)) ? 1 : 0;
    ds.costs[i] = gt.c(ei, t);
  }
  return ds;
}

std::pair<RctDataset, SyntheticGroundTruth> generate_featured(
    std::size_t n, int num_treatments, int feature_dim, std::uint64_t seed) {
  if (num_treatments < 2) throw InvalidK("featured generator needs K >= 2");
  if (feature_dim < 1) throw ZeroFeatureDim("featured generator needs d >= 1");
  if (n < 1) throw EmptyDataset("n must be >= 1");

  const int k = num_treatments;
  const int hidden = 32;

  // Fixed random projection features -> (base, increments). Weight scales
  // are chosen so the pre-squash outputs have roughly unit-to-double-unit
  // spread, which keeps the sigmoid outputs spread over (0, 1) and the
  // response parameters learnable instead of collapsing near a constant.
  RngStream map_rng = RngStream::derive(seed, "featured_map");
  Eigen::MatrixXd w1(hidden, feature_dim);
  Eigen::VectorXd b1(hidden);
  Eigen::MatrixXd w2(k, hidden);
  Eigen::VectorXd b2(k);
  const double w1_scale = std::sqrt(2.0 / feature_dim);
  const double w2_scale = 2.5 / std::sqrt(static_cast<double>(hidden));
  for (int r = 0; r < hidden; ++r)
    for (int cidx = 0; cidx < feature_dim; ++cidx)
      w1(r, cidx) = w1_scale * map_rng.gaussian();
  for (int r = 0; r < hidden; ++r) b1(r) = 0.5 * map_rng.gaussian();
  for (int r = 0; r < k; ++r)
    for (int cidx = 0; cidx < hidden; ++cidx)
      w2(r, cidx) = w2_scale * map_rng.gaussian();
  for (int r = 0; r < k; ++r) b2(r) = 0.5 * map_rng.gaussian();

  SyntheticGroundTruth gt;
  gt.v.resize(static_cast<Eigen::Index>(n), k);
  gt.c = cost_matrix(n, k);

  RctDataset ds;
  ds.num_treatments = k;
  ds.features.resize(static_cast<Eigen::Index>(n), feature_dim);
  ds.treatments.resize(n);
  ds.responses.resize(n);
  ds.costs.resize(n);

  Eigen::VectorXd x(feature_dim);
  std::vector<double> increments(static_cast<std::size_t>(k - 1));
  for (std::size_t i = 0; i < n; ++i) {
    RngStream feature_rng = RngStream::derive(seed, "features", i);
    for (int j = 0; j < feature_dim; ++j) x(j) = feature_rng.gaussian();
    ds.features.row(static_cast<Eigen::Index>(i)) = x.transpose();

    const Eigen::VectorXd h = (w1 * x + b1).array().tanh();
    const Eigen::VectorXd o = w2 * h + b2;
    auto squash = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    const double base = kBaseMax * squash(o(0));
    for (int j = 1; j < k; ++j)
      increments[static_cast<std::size_t>(j - 1)] = kIncrementMax * squash(o(j));
    fill_row(gt.v, static_cast<Eigen::Index>(i), base, increments);

    RngStream treatment_rng = RngStream::derive(seed, "treatments", i);
    RngStream outcome_rng = RngStream::derive(seed, "outcomes", i);
    const int t = static_cast<int>(treatment_rng.uniform_int(static_cast<std::uint64_t>(k)));
    const Eigen::Index ei = static_cast<Eigen::Index>(i);
    ds.treatments[i] = t;
    ds.responses[i] = outcome_rng.bernoulli(gt.v(ei, t)) ? 1 : 0;
    ds.costs[i] = gt.c(ei, t);
  }
  return {std::move(ds), std::move(gt)};
}

void save_ground_truth(const SyntheticGroundTruth& gt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const int k = gt.num_treatments();
  for (int j = 0; j < k; ++j) out << 'v' << (j + 1) << ',';
  for (int j = 0; j < k; ++j) out << 'c' << (j + 1) << (j + 1 < k ? ',' : '\n');
  char buf[32];
  for (Eigen::Index i = 0; i < gt.v.rows(); ++i) {
    for (int j = 0; j < k; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,", gt.v(i, j));
      out << buf;
    }
    for (int j = 0; j < k; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", gt.c(i, j));
      out << buf << (j + 1 < k ? ',' : '\n');
    }
  }
  if (!out) throw IoError("write failed for " + path);
}

SyntheticGroundTruth load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw EmptyDataset(path + " is empty");
  int k = 0;
  {
    std::stringstream ss(header);
    std::string field;
    while (std::getline(ss, field, ',')) {
      if (!field.empty() && field[0] == 'v') ++k;
    }
  }
  if (k < 1) throw ParseFailure("no v columns in " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
    if (static_cast<int>(row.size()) != 2 * k)
      throw ParseFailure("bad row width in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDataset(path + " has no data rows");

  SyntheticGroundTruth gt;
  gt.v.resize(static_cast<Eigen::Index>(rows.size()), k);
  gt.c.resize(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < k; ++j) {
      gt.v(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
      gt.c(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(k + j)];
    }
  return gt;
}

}  // namespace budgetalloc
