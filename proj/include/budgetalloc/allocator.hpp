#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "budgetalloc/dataset.hpp"
#include "budgetalloc/error.hpp"

namespace budgetalloc {

/// Model outputs for a batch: expected response probabilities and expected
/// costs for every user/treatment pair.
struct PredictionPair {
  Eigen::MatrixXd v;  // B x K, entries in [0, 1]
  Eigen::MatrixXd c;  // B x K, entries >= 0

  Eigen::Index rows() const { return v.rows(); }
  Eigen::Index cols() const { return v.cols(); }
  void validate() const;
};

/// One treatment per user. Stored as the chosen 0-based treatment index per
/// row, which is exactly a one-hot B x K matrix.
struct AllocationMatrix {
  int num_treatments = 1;
  std::vector<int> choice;

  std::size_t size() const { return choice.size(); }
  Eigen::MatrixXd dense() const;
};

/// Budget and search controls for evaluate_q.
struct QEvalParams {
  double total_budget = 0.0;  // T; the bisection target is T/B per capita
  int max_iters = 40;
  double alpha_max = 10.0;
  double tolerance = -1.0;  // per-capita cost units; <0 selects 1% of T/B
  int search_points = 1;    // midpoints per iteration; 1 is plain bisection
  // With the check off, an unattainable budget is not an error: bisection
  // walks alpha to alpha_max and reports the response there. Training uses
  // that mode, since early in a run the cost heads cannot yet steer the
  // empirical cost below the budget.
  bool check_feasibility = true;

  double per_capita_tolerance(double per_capita_budget) const {
    return tolerance >= 0.0 ? tolerance : 0.01 * per_capita_budget;
  }
  void validate() const;
};

/// One evaluated point of the empirical cost/response trade-off.
struct CurvePoint {
  double alpha = 0.0;
  double per_capita_cost = 0.0;
  double per_capita_response = 0.0;
  std::size_t matched_count = 0;
};

/// Matched-set empirical averages. An empty matched set yields (0, 0, 0)
/// rather than dividing by zero; callers see it through matched_count.
struct EomOutcome {
  double response = 0.0;
  double cost = 0.0;
  std::size_t matched_count = 0;

  bool empty() const { return matched_count == 0; }
};

struct QResult {
  double q = 0.0;            // per-capita response at the final midpoint
  double alpha_final = 0.0;
  double per_capita_cost = 0.0;
  bool converged = false;    // early break |C - T/B| <= tolerance was hit
  std::vector<CurvePoint> trace;
};

/// Chooses argmax_j (v_j - alpha * c_j) for one row; ties go to the lowest
/// cost, then the lowest index. Every allocation in the library goes through
/// this function so tie-breaking is identical everywhere.
int choose_treatment(const double* v_row, const double* c_row, int k,
                     double alpha);

/// Lagrangian dual objective: alpha * T + sum_i max_j (v_ij - alpha * c_ij).
double dual_objective(const PredictionPair& pred, double total_budget,
                      double alpha);

/// Primal recovery from a dual point: per-row argmax of v - alpha * c.
AllocationMatrix recover_allocation(const PredictionPair& pred, double alpha);

/// Indices whose logged treatment equals the allocated treatment.
std::vector<std::size_t> matched_indices(const AllocationMatrix& x,
                                         const RctBatch& batch);

/// Mean response and cost over a matched index set.
EomOutcome eom_outcome(const std::vector<std::size_t>& matched,
                       const RctBatch& batch);

/// Predicted (non-empirical) totals of an allocation under the model.
double allocation_value(const PredictionPair& pred, const AllocationMatrix& x);
double allocation_cost(const PredictionPair& pred, const AllocationMatrix& x);

/// Precomputed structure for evaluating the allocation + matched-set
/// averages at many alpha values against a fixed (v, c, batch).
///
/// For one row the chosen treatment, as a function of alpha, switches only
/// at crossings of the per-treatment score lines v_j - alpha * c_j, and
/// (with the lowest-cost tie rule) never switches back to a more expensive
/// treatment, so the set of alpha where the row's logged treatment is chosen
/// is a single half-open interval [a_i, b_i), computed directly from the
/// pairwise crossings of the logged treatment's line with the others. A
/// query is then one pass of two comparisons per row instead of a full
/// argmax scan.
///
/// Floating point blurs choose_treatment within a few ulps of a crossing,
/// so queries inside a small window around a row's interval endpoints
/// re-evaluate that row with choose_treatment directly, and rows whose
/// geometry is ill-conditioned (nearly parallel score lines, intervals
/// missed by a hair) are always evaluated directly. Since the accumulation
/// runs in row order, query results are bit-identical to
/// eom_outcome(matched_indices(recover_allocation(pred, alpha), batch)).
class AllocationIndex {
 public:
  AllocationIndex(const PredictionPair& pred, const RctBatch& batch);

  /// Matched-set averages at one alpha; equals the piecewise recomputation
  /// through recover_allocation exactly.
  EomOutcome query(double alpha) const;

  std::size_t rows() const { return num_rows_; }

 private:
  std::size_t num_rows_ = 0;
  int num_treatments_ = 0;
  // Row-major copies for cache-friendly per-row scans.
  std::vector<double> v_;
  std::vector<double> c_;
  std::vector<int> treatments_;
  std::vector<double> y_;
  std::vector<double> z_;

  std::vector<double> interval_start_;  // +inf when the row never matches
  std::vector<double> interval_end_;
  std::vector<unsigned char> always_direct_;
};

/// Bisection for Q(v, c): finds alpha where the empirical per-capita cost
/// meets the per-capita budget and returns the empirical per-capita response
/// there. Breaks early when |C - T/B| <= tolerance, otherwise runs
/// max_iters iterations and returns the last midpoint. An empty matched set
/// reads as zero cost, i.e. "budget too low", shrinking alpha. Throws
/// InfeasibleBudget when even alpha_max cannot bring the cost down to the
/// budget.
QResult evaluate_q(const PredictionPair& pred, const RctBatch& batch,
                   const QEvalParams& params);

/// The evaluate_q inner step swept over a fixed grid of alphas.
std::vector<CurvePoint> cost_value_curve(const PredictionPair& pred,
                                         const RctBatch& batch,
                                         const std::vector<double>& alpha_grid);

void save_curve(const std::vector<CurvePoint>& curve, const std::string& path);
std::vector<CurvePoint> load_curve(const std::string& path);

struct OracleResult {
  double best_value = 0.0;
  AllocationMatrix best;
};

/// Exhaustive search over all K^B allocations, for certifying the dual
/// machinery on small instances. Guarded at K^B <= 1e7. Feasibility allows
/// a 1e-9 slack on the budget so an allocation whose cost was accumulated
/// in the same row order is never rejected by rounding.
OracleResult brute_force_oracle(const PredictionPair& pred, double total_budget);

}  // namespace budgetalloc
