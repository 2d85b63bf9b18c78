#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "budgetalloc/error.hpp"

namespace budgetalloc {

/// One randomized-trial observation. Treatments are 0-based in memory; the
/// file boundary converts to and from the external 1-based labels exactly
/// once at parse/serialize time.
struct RctSample {
  std::vector<double> features;
  int treatment = 0;
  int response = 0;
  double cost = 0.0;
};

/// Columnar randomized-trial dataset. Immutable by convention after
/// construction; safe to share across threads for reading.
struct RctDataset {
  Eigen::MatrixXd features;      // n x d (d may be 0)
  std::vector<int> treatments;   // 0-based, in [0, num_treatments)
  std::vector<int> responses;    // {0, 1}
  std::vector<double> costs;     // >= 0
  int num_treatments = 1;

  std::size_t size() const { return treatments.size(); }
  int feature_dim() const { return static_cast<int>(features.cols()); }

  RctSample sample(std::size_t i) const;
  void push_back(const RctSample& s);

  /// Checks all invariants; throws the matching error type.
  void validate() const;
};

/// A contiguous batch view materialized from a dataset.
struct RctBatch {
  Eigen::MatrixXd features;
  std::vector<int> treatments;
  std::vector<int> responses;
  std::vector<double> costs;

  std::size_t size() const { return treatments.size(); }
};

/// Maps file columns to sample fields. Feature columns default to every
/// header column not claimed by treatment/response/cost, in header order;
/// set `packed_feature_column` to read all features from one column of
/// space-separated reals instead.
struct DatasetSchema {
  std::string treatment_column = "treatment";
  std::string response_column = "response";
  std::string cost_column = "cost";
  std::vector<std::string> feature_columns;
  std::string packed_feature_column;
  bool zero_based_treatments = false;
  std::optional<int> num_treatments;  // pin K instead of inferring max
};

struct LoadReport {
  std::size_t rows_loaded = 0;
  std::size_t rows_with_missing_values = 0;  // skipped and counted
};

/// Parses a delimited-text dataset (comma separator, header row). Rows with
/// empty fields are excluded and counted in the report; any other parse
/// failure or invariant violation is an error.
RctDataset load_dataset(const std::string& path, const DatasetSchema& schema = {},
                        LoadReport* report = nullptr);

/// Writes the dataset in the same format load_dataset reads. Reals are
/// printed with 17 significant digits so a reload reproduces them exactly.
void save_dataset(const RctDataset& dataset, const std::string& path,
                  const DatasetSchema& schema = {});

/// Disjoint random partition with sizes (ceil(fraction*n), rest).
std::pair<RctDataset, RctDataset> split(const RctDataset& dataset,
                                        double fraction, std::uint64_t seed);

/// One epoch of shuffled batches; the final partial batch is emitted.
std::vector<RctBatch> batches(const RctDataset& dataset, std::size_t batch_size,
                              std::uint64_t shuffle_seed);

RctBatch full_batch(const RctDataset& dataset);

/// Per-feature affine map fitted on training data. Degenerate (zero
/// variance) columns map to 0 and are not invertible.
struct FeatureTransform {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // 1/std, or 0 for degenerate columns

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& z) const;
  RctDataset apply(const RctDataset& dataset) const;
};

/// Fits mean/std (population variance) on the training columns and returns
/// the transform together with the transformed dataset.
std::pair<FeatureTransform, RctDataset> standardize_features(
    const RctDataset& train);

}  // namespace budgetalloc
