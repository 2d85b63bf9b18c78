#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>

#include "budgetalloc/dataset.hpp"

namespace budgetalloc {

/// Per-user true response probabilities and treatment costs for synthetic
/// trials. Rows of `v` are non-decreasing across treatments with
/// non-increasing increments; `c(i, j) = j + 1` (treatment levels cost their
/// 1-based index).
struct SyntheticGroundTruth {
  Eigen::MatrixXd v;  // n x K, entries in [0, 1]
  Eigen::MatrixXd c;  // n x K, c(i, j) = j + 1

  std::size_t size() const { return static_cast<std::size_t>(v.rows()); }
  int num_treatments() const { return static_cast<int>(v.cols()); }
};

/// Featureless ground truth: base response ~ U[0, 0.1], then K-1 increments
/// drawn i.i.d. from U[0, 0.2], sorted in descending order and accumulated.
SyntheticGroundTruth generate_ground_truth(std::size_t n, int num_treatments,
                                           std::uint64_t seed);

/// Samples an RCT log from ground truth: uniform random treatment, Bernoulli
/// response with the true probability, cost equal to the true cost of the
/// assigned treatment. The result has no features (d = 0).
RctDataset sample_rct(const SyntheticGroundTruth& gt, std::uint64_t seed);

/// Featured variant: user features are i.i.d. standard normal and the
/// response parameters come from a fixed seeded one-hidden-layer tanh
/// projection of the features, squashed into the same base/increment ranges
/// and run through the same sort-and-accumulate construction, so every row
/// satisfies the ground-truth invariants while remaining learnable from the
/// features. Costs and RCT sampling are unchanged.
std::pair<RctDataset, SyntheticGroundTruth> generate_featured(
    std::size_t n, int num_treatments, int feature_dim, std::uint64_t seed);

/// Sidecar file with the true response/cost matrices (columns v1..vK,c1..cK).
void save_ground_truth(const SyntheticGroundTruth& gt, const std::string& path);
SyntheticGroundTruth load_ground_truth(const std::string& path);

}  // namespace budgetalloc
