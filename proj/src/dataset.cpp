#include "budgetalloc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "budgetalloc/rng.hpp"

namespace budgetalloc {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_real(const std::string& s, const std::string& what,
                  std::size_t line_no) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, value);
  if (ec != std::errc() || ptr != e) {
    throw ParseFailure("line " + std::to_string(line_no) + ": cannot parse " +
                       what + " from '" + s + "'");
  }
  return value;
}

long parse_int(const std::string& s, const std::string& what,
               std::size_t line_no) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  long value = 0;
  auto [ptr, ec] = std::from_chars(b, e, value);
  if (ec != std::errc() || ptr != e) {
    throw ParseFailure("line " + std::to_string(line_no) + ": cannot parse " +
                       what + " from '" + s + "'");
  }
  return value;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RctSample RctDataset::sample(std::size_t i) const {
  RctSample s;
  s.features.resize(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index j = 0; j < features.cols(); ++j)
    s.features[static_cast<std::size_t>(j)] = features(static_cast<Eigen::Index>(i), j);
  s.treatment = treatments[i];
  s.response = responses[i];
  s.cost = costs[i];
  return s;
}

void RctDataset::push_back(const RctSample& s) {
  const Eigen::Index n = static_cast<Eigen::Index>(size());
  features.conservativeResize(n + 1, static_cast<Eigen::Index>(s.features.size()));
  for (std::size_t j = 0; j < s.features.size(); ++j)
    features(n, static_cast<Eigen::Index>(j)) = s.features[j];
  treatments.push_back(s.treatment);
  responses.push_back(s.response);
  costs.push_back(s.cost);
}

void RctDataset::validate() const {
  if (num_treatments < 1) throw InvalidK("num_treatments must be >= 1");
  if (treatments.size() != responses.size() || treatments.size() != costs.size() ||
      static_cast<std::size_t>(features.rows()) != treatments.size()) {
    throw ShapeMismatch("dataset columns have inconsistent lengths");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    if (treatments[i] < 0 || treatments[i] >= num_treatments)
      throw TreatmentOutOfRange("sample " + std::to_string(i));
    if (responses[i] != 0 && responses[i] != 1)
      throw NonBinaryResponse("sample " + std::to_string(i));
    if (!(costs[i] >= 0.0)) throw NegativeCost("sample " + std::to_string(i));
  }
}

RctDataset load_dataset(const std::string& path, const DatasetSchema& schema,
                        LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string header_line;
  if (!std::getline(in, header_line)) throw EmptyDataset(path + " is empty");
  const std::vector<std::string> header = [&] {
    auto h = split_line(strip_cr(header_line), ',');
    return h;
  }();

  auto column_index = [&](const std::string& name) -> int {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  };
  auto required_column = [&](const std::string& name) -> int {
    const int j = column_index(name);
    if (j < 0) throw MissingColumn("column '" + name + "' not in header of " + path);
    return j;
  };

  const int treatment_col = required_column(schema.treatment_column);
  const int response_col = required_column(schema.response_column);
  const int cost_col = required_column(schema.cost_column);

  const bool packed = !schema.packed_feature_column.empty();
  int packed_col = -1;
  std::vector<int> feature_cols;
  if (packed) {
    packed_col = required_column(schema.packed_feature_column);
  } else if (!schema.feature_columns.empty()) {
    for (const auto& name : schema.feature_columns)
      feature_cols.push_back(required_column(name));
  } else {
    for (std::size_t j = 0; j < header.size(); ++j) {
      const int ji = static_cast<int>(j);
      if (ji != treatment_col && ji != response_col && ji != cost_col)
        feature_cols.push_back(ji);
    }
  }

  std::vector<std::vector<double>> feature_rows;
  std::vector<int> treatments;
  std::vector<int> responses;
  std::vector<double> costs;
  LoadReport local;

  std::string line;
  std::size_t line_no = 1;
  std::optional<std::size_t> feature_dim;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_line(line, ',');
    if (fields.size() != header.size())
      throw ParseFailure("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields, got " +
                         std::to_string(fields.size()));
    const bool missing =
        std::any_of(fields.begin(), fields.end(),
                    [](const std::string& f) { return f.empty(); });
    if (missing) {
      ++local.rows_with_missing_values;
      continue;
    }

    long treatment = parse_int(fields[static_cast<std::size_t>(treatment_col)],
                               "treatment", line_no);
    if (schema.zero_based_treatments) treatment += 1;
    const long response = parse_int(fields[static_cast<std::size_t>(response_col)],
                                    "response", line_no);
    const double cost = parse_real(fields[static_cast<std::size_t>(cost_col)],
                                   "cost", line_no);
    if (response != 0 && response != 1)
      throw NonBinaryResponse("line " + std::to_string(line_no) + ": response " +
                              std::to_string(response));
    if (cost < 0.0)
      throw NegativeCost("line " + std::to_string(line_no) + ": cost " +
                         format_real(cost));
    if (treatment < 1)
      throw TreatmentOutOfRange("line " + std::to_string(line_no) +
                                ": treatment " + std::to_string(treatment));
    if (schema.num_treatments && treatment > *schema.num_treatments)
      throw TreatmentOutOfRange("line " + std::to_string(line_no) +
                                ": treatment " + std::to_string(treatment) +
                                " > K=" + std::to_string(*schema.num_treatments));

    std::vector<double> feats;
    if (packed) {
      std::stringstream ps(fields[static_cast<std::size_t>(packed_col)]);
      std::string tok;
      while (ps >> tok) feats.push_back(parse_real(tok, "feature", line_no));
    } else {
      feats.reserve(feature_cols.size());
      for (int j : feature_cols)
        feats.push_back(
            parse_real(fields[static_cast<std::size_t>(j)], "feature", line_no));
    }
    if (!feature_dim) feature_dim = feats.size();
    if (feats.size() != *feature_dim)
      throw ParseFailure("line " + std::to_string(line_no) +
                         ": inconsistent feature count");

    feature_rows.push_back(std::move(feats));
    treatments.push_back(static_cast<int>(treatment - 1));
    responses.push_back(static_cast<int>(response));
    costs.push_back(cost);
  }

  if (treatments.empty()) throw EmptyDataset(path + " has no data rows");
  local.rows_loaded = treatments.size();

  RctDataset ds;
  const std::size_t n = treatments.size();
  const std::size_t d = feature_dim.value_or(0);
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          feature_rows[i][j];
  ds.treatments = std::move(treatments);
  ds.responses = std::move(responses);
  ds.costs = std::move(costs);

  int max_treatment = 0;
  for (int t : ds.treatments) max_treatment = std::max(max_treatment, t);
  ds.num_treatments = schema.num_treatments.value_or(max_treatment + 1);
  ds.validate();

  if (report) *report = local;
  return ds;
}

void save_dataset(const RctDataset& dataset, const std::string& path,
                  const DatasetSchema& schema) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);

  const int d = dataset.feature_dim();
  const bool packed = !schema.packed_feature_column.empty();
  std::vector<std::string> feature_names = schema.feature_columns;
  if (!packed && feature_names.empty()) {
    for (int j = 0; j < d; ++j) feature_names.push_back("f" + std::to_string(j));
  }
  if (!packed && static_cast<int>(feature_names.size()) != d)
    throw ConfigError("schema names " + std::to_string(feature_names.size()) +
                      " feature columns for a dataset with d=" + std::to_string(d));

  if (packed && d > 0) out << schema.packed_feature_column << ',';
  for (const auto& name : feature_names) out << name << ',';
  out << schema.treatment_column << ',' << schema.response_column << ','
      << schema.cost_column << '\n';

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (packed && d > 0) {
      for (int j = 0; j < d; ++j) {
        if (j) out << ' ';
        out << format_real(dataset.features(static_cast<Eigen::Index>(i), j));
      }
      out << ',';
    } else {
      for (int j = 0; j < d; ++j)
        out << format_real(dataset.features(static_cast<Eigen::Index>(i), j)) << ',';
    }
    const int external_treatment =
        dataset.treatments[i] + (schema.zero_based_treatments ? 0 : 1);
    out << external_treatment << ',' << dataset.responses[i] << ','
        << format_real(dataset.costs[i]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

namespace {

RctDataset take_rows(const RctDataset& dataset, const std::vector<std::size_t>& idx) {
  RctDataset out;
  out.num_treatments = dataset.num_treatments;
  out.features.resize(static_cast<Eigen::Index>(idx.size()), dataset.features.cols());
  out.treatments.reserve(idx.size());
  out.responses.reserve(idx.size());
  out.costs.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) =
        dataset.features.row(static_cast<Eigen::Index>(idx[r]));
    out.treatments.push_back(dataset.treatments[idx[r]]);
    out.responses.push_back(dataset.responses[idx[r]]);
    out.costs.push_back(dataset.costs[idx[r]]);
  }
  return out;
}

}  // namespace

std::pair<RctDataset, RctDataset> split(const RctDataset& dataset,
                                        double fraction, std::uint64_t seed) {
  if (dataset.size() == 0) throw EmptyDataset("cannot split an empty dataset");
  const std::size_t n = dataset.size();
  // ceil(fraction*n); the epsilon keeps decimal fractions like 0.7*10 from
  // rounding up to 8 through floating point.
  const std::size_t first = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  RngStream rng = RngStream::derive(seed, "split");
  rng.shuffle(idx);
  const std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<long>(first));
  const std::vector<std::size_t> b(idx.begin() + static_cast<long>(first), idx.end());
  return {take_rows(dataset, a), take_rows(dataset, b)};
}

std::vector<RctBatch> batches(const RctDataset& dataset, std::size_t batch_size,
                              std::uint64_t shuffle_seed) {
  if (batch_size < 1) throw InvalidParams("batch_size must be >= 1");
  const std::size_t n = dataset.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  RngStream rng = RngStream::derive(shuffle_seed, "shuffle");
  rng.shuffle(idx);

  std::vector<RctBatch> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    RctBatch b;
    b.features.resize(static_cast<Eigen::Index>(stop - start), dataset.features.cols());
    for (std::size_t i = start; i < stop; ++i) {
      b.features.row(static_cast<Eigen::Index>(i - start)) =
          dataset.features.row(static_cast<Eigen::Index>(idx[i]));
      b.treatments.push_back(dataset.treatments[idx[i]]);
      b.responses.push_back(dataset.responses[idx[i]]);
      b.costs.push_back(dataset.costs[idx[i]]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

RctBatch full_batch(const RctDataset& dataset) {
  RctBatch b;
  b.features = dataset.features;
  b.treatments = dataset.treatments;
  b.responses = dataset.responses;
  b.costs = dataset.costs;
  return b;
}

Eigen::MatrixXd FeatureTransform::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) throw ShapeMismatch("feature dim mismatch");
  return (x.rowwise() - mean.transpose()).array().rowwise() *
         scale.transpose().array();
}

Eigen::MatrixXd FeatureTransform::inverse(const Eigen::MatrixXd& z) const {
  if (z.cols() != mean.size()) throw ShapeMismatch("feature dim mismatch");
  Eigen::MatrixXd x = z;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (scale(j) == 0.0) throw InvalidParams("degenerate column is not invertible");
    x.col(j) = z.col(j) / scale(j) + Eigen::VectorXd::Constant(z.rows(), mean(j));
  }
  return x;
}

RctDataset FeatureTransform::apply(const RctDataset& dataset) const {
  RctDataset out = dataset;
  out.features = apply(dataset.features);
  return out;
}

std::pair<FeatureTransform, RctDataset> standardize_features(
    const RctDataset& train) {
  if (train.feature_dim() < 1) throw ZeroFeatureDim("dataset has no features");
  const Eigen::Index n = train.features.rows();
  FeatureTransform t;
  t.mean = train.features.colwise().mean();
  Eigen::MatrixXd centered = train.features.rowwise() - t.mean.transpose();
  Eigen::VectorXd var =
      centered.array().square().colwise().sum() / static_cast<double>(n);
  t.scale.resize(var.size());
  for (Eigen::Index j = 0; j < var.size(); ++j)
    t.scale(j) = var(j) > 0.0 ? 1.0 / std::sqrt(var(j)) : 0.0;
  return {t, t.apply(train)};
}

}  // namespace budgetalloc
