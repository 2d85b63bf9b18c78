#pragma once

#include <string>
#include <vector>

#include "budgetalloc/allocator.hpp"
#include "budgetalloc/dataset.hpp"

namespace budgetalloc {

struct EomAtBudget {
  double response = 0.0;
  double cost = 0.0;
  double alpha = 0.0;
  bool converged = false;
};

/// Per-capita response found by bisection at the requested per-capita cost;
/// a thin wrapper over evaluate_q.
EomAtBudget eom_at_budget(const PredictionPair& pred, const RctBatch& batch,
                          double per_capita_budget, QEvalParams q_params);

/// One point of the incremental cost/value sweep in the two-treatment
/// setting.
struct CostCurvePoint {
  double treated_fraction = 0.0;
  double incremental_cost = 0.0;   // per-capita, relative to all-control
  double incremental_value = 0.0;
};

struct CostCurve {
  std::vector<CostCurvePoint> points;  // ordered by treated fraction
};

/// Sweeps treated fractions 0%, 1%, ..., 100%: the top fraction of users by
/// descending score is assigned the treated arm (treatment 2), the rest the
/// control arm (treatment 1), and each mixed policy is evaluated by matching
/// against the logged arm. Points are incremental against the all-control
/// policy, so the first point is the origin. Requires K = 2.
CostCurve build_cost_curve(const std::vector<double>& scores,
                           const RctDataset& rct);

/// Trapezoidal area under the (incremental cost, incremental value) curve,
/// normalized by the bounding rectangle (max cost x max value), so random
/// targeting scores about 0.5. Comparable only across curves built by
/// build_cost_curve.
double aucc(const CostCurve& curve);

/// Ranking scores for the two-treatment setting: response uplift over cost
/// uplift per user, with the denominator floored at 1e-9.
std::vector<double> uplift_ratio_scores(const PredictionPair& pred);

void save_cost_curve(const CostCurve& curve, const std::string& path);

}  // namespace budgetalloc
