#include "budgetalloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace budgetalloc {

EomAtBudget eom_at_budget(const PredictionPair& pred, const RctBatch& batch,
                          double per_capita_budget, QEvalParams q_params) {
  q_params.total_budget = per_capita_budget * static_cast<double>(batch.size());
  const QResult q = evaluate_q(pred, batch, q_params);
  return {q.q, q.per_capita_cost, q.alpha_final, q.converged};
}

CostCurve build_cost_curve(const std::vector<double>& scores,
                           const RctDataset& rct) {
  if (rct.num_treatments != 2)
    throw NotTwoTreatments("cost curve needs exactly two treatments");
  if (scores.size() != rct.size())
    throw ShapeMismatch("scores length != dataset size");
  for (double s : scores)
    if (!std::isfinite(s)) throw InvalidParams("scores must be finite");

  const std::size_t n = rct.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  // rank_of[i] < n_treated  <=>  user i is in the treated top slice.
  std::vector<std::size_t> rank_of(n);
  for (std::size_t r = 0; r < n; ++r) rank_of[order[r]] = r;

  auto policy_outcome = [&](std::size_t n_treated, double* response,
                            double* cost) {
    double sum_y = 0.0, sum_z = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int assigned = rank_of[i] < n_treated ? 1 : 0;
      if (rct.treatments[i] != assigned) continue;
      sum_y += rct.responses[i];
      sum_z += rct.costs[i];
      ++count;
    }
    if (count == 0) {
      *response = 0.0;
      *cost = 0.0;
      return;
    }
    *response = sum_y / static_cast<double>(count);
    *cost = sum_z / static_cast<double>(count);
  };

  double base_response = 0.0, base_cost = 0.0;
  policy_outcome(0, &base_response, &base_cost);

  CostCurve curve;
  for (int g = 0; g <= 100; ++g) {
    const double fraction = static_cast<double>(g) / 100.0;
    const std::size_t n_treated = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n)));
    double response = 0.0, cost = 0.0;
    policy_outcome(n_treated, &response, &cost);
    curve.points.push_back(
        {fraction, cost - base_cost, response - base_response});
  }
  return curve;
}

double aucc(const CostCurve& curve) {
  if (curve.points.size() < 2)
    throw DegenerateCurve("need at least two curve points");
  double max_cost = 0.0;
  double max_value = 0.0;
  for (const CostCurvePoint& p : curve.points) {
    max_cost = std::max(max_cost, p.incremental_cost);
    max_value = std::max(max_value, p.incremental_value);
  }
  if (max_cost == 0.0)
    throw DegenerateCurve("all curve costs are equal");
  if (max_value == 0.0)
    throw DegenerateCurve("curve has no positive incremental value");

  double area = 0.0;
  for (std::size_t p = 1; p < curve.points.size(); ++p) {
    const CostCurvePoint& a = curve.points[p - 1];
    const CostCurvePoint& b = curve.points[p];
    area += (b.incremental_cost - a.incremental_cost) *
            (a.incremental_value + b.incremental_value) / 2.0;
  }
  return area / (max_cost * max_value);
}

std::vector<double> uplift_ratio_scores(const PredictionPair& pred) {
  if (pred.cols() != 2)
    throw NotTwoTreatments("uplift ratio needs exactly two treatments");
  std::vector<double> scores(static_cast<std::size_t>(pred.rows()));
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const double dv = pred.v(i, 1) - pred.v(i, 0);
    const double dc = std::max(pred.c(i, 1) - pred.c(i, 0), 1e-9);
    scores[static_cast<std::size_t>(i)] = dv / dc;
  }
  return scores;
}

void save_cost_curve(const CostCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "treated_fraction,incremental_cost,incremental_value\n";
  char buf[128];
  for (const CostCurvePoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.treated_fraction,
                  p.incremental_cost, p.incremental_value);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace budgetalloc
