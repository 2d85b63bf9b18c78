#include "budgetalloc/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace budgetalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Queries within this window of a stored crossing re-check the affected rows
// directly; it dominates the few-ulp error of the crossing computation by
// several orders of magnitude.
double boundary_window(double alpha) { return 1e-9 * (1.0 + std::abs(alpha)); }

// Crossings of score lines with cost gaps below this are too ill-conditioned
// to locate reliably; such rows bypass the interval index entirely.
constexpr double kMinCostGap = 1e-5;

void check_shapes(const PredictionPair& pred, const RctBatch& batch) {
  if (batch.size() == 0) throw ShapeMismatch("batch is empty");
  if (static_cast<std::size_t>(pred.rows()) != batch.size())
    throw ShapeMismatch("prediction rows != batch size");
  if (pred.v.rows() != pred.c.rows() || pred.v.cols() != pred.c.cols())
    throw ShapeMismatch("v and c shapes differ");
}

}  // namespace

void PredictionPair::validate() const {
  if (v.rows() != c.rows() || v.cols() != c.cols())
    throw ShapeMismatch("v and c shapes differ");
  if (v.rows() < 1 || v.cols() < 1) throw ShapeMismatch("empty prediction");
  if ((v.array() < 0.0).any() || (v.array() > 1.0).any())
    throw InvalidParams("v entries must lie in [0, 1]");
  if ((c.array() < 0.0).any()) throw InvalidParams("c entries must be >= 0");
}

void QEvalParams::validate() const {
  if (max_iters < 1) throw InvalidParams("max_iters must be >= 1");
  if (!(alpha_max > 0.0)) throw InvalidParams("alpha_max must be > 0");
  if (!(total_budget >= 0.0)) throw InvalidParams("total_budget must be >= 0");
  if (search_points < 1) throw InvalidParams("search_points must be >= 1");
}

Eigen::MatrixXd AllocationMatrix::dense() const {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(choice.size()),
                                            num_treatments);
  for (std::size_t i = 0; i < choice.size(); ++i)
    x(static_cast<Eigen::Index>(i), choice[i]) = 1.0;
  return x;
}

int choose_treatment(const double* v_row, const double* c_row, int k,
                     double alpha) {
  int best = 0;
  double best_score = v_row[0] - alpha * c_row[0];
  for (int j = 1; j < k; ++j) {
    const double score = v_row[j] - alpha * c_row[j];
    if (score > best_score ||
        (score == best_score && c_row[j] < c_row[best])) {
      best = j;
      best_score = score;
    }
  }
  return best;
}

double dual_objective(const PredictionPair& pred, double total_budget,
                      double alpha) {
  if (alpha < 0.0) throw NegativeAlpha("alpha must be >= 0");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    double best = pred.v(i, 0) - alpha * pred.c(i, 0);
    for (Eigen::Index j = 1; j < pred.cols(); ++j)
      best = std::max(best, pred.v(i, j) - alpha * pred.c(i, j));
    sum += best;
  }
  return alpha * total_budget + sum;
}

AllocationMatrix recover_allocation(const PredictionPair& pred, double alpha) {
  if (alpha < 0.0) throw NegativeAlpha("alpha must be >= 0");
  const int k = static_cast<int>(pred.cols());
  AllocationMatrix x;
  x.num_treatments = k;
  x.choice.resize(static_cast<std::size_t>(pred.rows()));
  std::vector<double> v_row(static_cast<std::size_t>(k));
  std::vector<double> c_row(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (int j = 0; j < k; ++j) {
      v_row[static_cast<std::size_t>(j)] = pred.v(i, j);
      c_row[static_cast<std::size_t>(j)] = pred.c(i, j);
    }
    x.choice[static_cast<std::size_t>(i)] =
        choose_treatment(v_row.data(), c_row.data(), k, alpha);
  }
  return x;
}

std::vector<std::size_t> matched_indices(const AllocationMatrix& x,
                                         const RctBatch& batch) {
  if (x.size() != batch.size())
    throw ShapeMismatch("allocation size != batch size");
  std::vector<std::size_t> matched;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (batch.treatments[i] == x.choice[i]) matched.push_back(i);
  return matched;
}

EomOutcome eom_outcome(const std::vector<std::size_t>& matched,
                       const RctBatch& batch) {
  EomOutcome out;
  out.matched_count = matched.size();
  if (matched.empty()) return out;
  double sum_y = 0.0;
  double sum_z = 0.0;
  for (std::size_t i : matched) {
    if (i >= batch.size()) throw ShapeMismatch("matched index out of range");
    sum_y += batch.responses[i];
    sum_z += batch.costs[i];
  }
  out.response = sum_y / static_cast<double>(matched.size());
  out.cost = sum_z / static_cast<double>(matched.size());
  return out;
}

double allocation_value(const PredictionPair& pred, const AllocationMatrix& x) {
  if (static_cast<std::size_t>(pred.rows()) != x.size())
    throw ShapeMismatch("allocation size != prediction rows");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    sum += pred.v(static_cast<Eigen::Index>(i), x.choice[i]);
  return sum;
}

double allocation_cost(const PredictionPair& pred, const AllocationMatrix& x) {
  if (static_cast<std::size_t>(pred.rows()) != x.size())
    throw ShapeMismatch("allocation size != prediction rows");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    sum += pred.c(static_cast<Eigen::Index>(i), x.choice[i]);
  return sum;
}

AllocationIndex::AllocationIndex(const PredictionPair& pred,
                                 const RctBatch& batch) {
  check_shapes(pred, batch);
  num_rows_ = batch.size();
  num_treatments_ = static_cast<int>(pred.cols());
  const int k = num_treatments_;

  v_.resize(num_rows_ * static_cast<std::size_t>(k));
  c_.resize(num_rows_ * static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < num_rows_; ++i)
    for (int j = 0; j < k; ++j) {
      v_[i * k + j] = pred.v(static_cast<Eigen::Index>(i), j);
      c_[i * k + j] = pred.c(static_cast<Eigen::Index>(i), j);
    }
  treatments_ = batch.treatments;
  y_.assign(batch.responses.begin(), batch.responses.end());
  z_ = batch.costs;

  interval_start_.assign(num_rows_, kInf);
  interval_end_.assign(num_rows_, kInf);
  always_direct_.assign(num_rows_, 0);

  // The logged treatment t beats rival j on a half-line of alphas: from the
  // crossing upward when j is costlier (ties go to the cheaper t), up to the
  // crossing when j is cheaper. Intersecting the half-lines gives [a, b).
  for (std::size_t i = 0; i < num_rows_; ++i) {
    const double* vr = &v_[i * k];
    const double* cr = &c_[i * k];
    const int t = treatments_[i];

    double lo = 0.0;
    double hi = kInf;
    bool direct = false;
    bool never = false;
    for (int j = 0; j < k && !direct && !never; ++j) {
      if (j == t) continue;
      const double dc = cr[j] - cr[t];
      if (dc == 0.0) {
        // Parallel lines: the order is fixed by v, then index, but a
        // near-tie in v wobbles at any alpha.
        if (std::abs(vr[j] - vr[t]) < 1e-12) {
          direct = true;
        } else if (vr[j] > vr[t]) {
          never = true;
        }
        continue;
      }
      if (std::abs(dc) < kMinCostGap) {
        direct = true;
        continue;
      }
      const double x = (vr[j] - vr[t]) / (cr[j] - cr[t]);
      if (dc > 0.0)
        lo = std::max(lo, x);
      else
        hi = std::min(hi, x);
    }
    if (direct) {
      always_direct_[i] = 1;
      continue;
    }
    if (never) continue;
    if (lo >= hi) {
      // Intervals missed by a hair can still flip within float noise.
      if (lo - hi < 1e-7 * (1.0 + std::abs(lo))) always_direct_[i] = 1;
      continue;
    }
    interval_start_[i] = lo;
    interval_end_[i] = hi;
  }
}

EomOutcome AllocationIndex::query(double alpha) const {
  if (alpha < 0.0) throw NegativeAlpha("alpha must be >= 0");
  const double w = boundary_window(alpha);
  const int k = num_treatments_;

  double sum_y = 0.0;
  double sum_z = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < num_rows_; ++i) {
    const double a = interval_start_[i];
    const double b = interval_end_[i];
    bool matched;
    if (always_direct_[i] || std::abs(alpha - a) <= w ||
        std::abs(alpha - b) <= w) {
      matched = choose_treatment(&v_[i * k], &c_[i * k], k, alpha) ==
                treatments_[i];
    } else {
      matched = a <= alpha && alpha < b;
    }
    if (matched) {
      sum_y += y_[i];
      sum_z += z_[i];
      ++count;
    }
  }

  EomOutcome out;
  out.matched_count = count;
  if (count > 0) {
    out.response = sum_y / static_cast<double>(count);
    out.cost = sum_z / static_cast<double>(count);
  }
  return out;
}

QResult evaluate_q(const PredictionPair& pred, const RctBatch& batch,
                   const QEvalParams& params) {
  check_shapes(pred, batch);
  params.validate();

  const double batch_size = static_cast<double>(batch.size());
  const double target = params.total_budget / batch_size;
  const double tol = params.per_capita_tolerance(target);

  const AllocationIndex index(pred, batch);

  // The budget must be attainable somewhere in [0, alpha_max].
  if (params.check_feasibility) {
    const EomOutcome at_max = index.query(params.alpha_max);
    if (at_max.cost > target + tol)
      throw InfeasibleBudget("per-capita cost at alpha_max (" +
                             std::to_string(at_max.cost) +
                             ") exceeds the per-capita budget " +
                             std::to_string(target));
  }

  QResult result;
  double alpha_lo = 0.0;
  double alpha_hi = params.alpha_max;
  const int n = params.search_points;
  for (int iter = 1; iter <= params.max_iters && !result.converged; ++iter) {
    // Evaluate n midpoints; n = 1 is the plain bisection midpoint.
    int best_point = -1;
    double best_err = kInf;
    std::vector<CurvePoint> points;
    points.reserve(static_cast<std::size_t>(n));
    for (int p = 1; p <= n; ++p) {
      const double alpha =
          alpha_lo + (alpha_hi - alpha_lo) * static_cast<double>(p) /
                         static_cast<double>(n + 1);
      const EomOutcome eom = index.query(alpha);
      points.push_back({alpha, eom.cost, eom.response, eom.matched_count});
      const double err = std::abs(eom.cost - target);
      if (err < best_err) {
        best_err = err;
        best_point = p - 1;
      }
    }
    for (const CurvePoint& cp : points) result.trace.push_back(cp);

    const CurvePoint& chosen = points[static_cast<std::size_t>(best_point)];
    result.q = chosen.per_capita_response;
    result.alpha_final = chosen.alpha;
    result.per_capita_cost = chosen.per_capita_cost;
    if (best_err <= tol) {
      result.converged = true;
      break;
    }

    // Shrink to the bracketing segment: cost above budget means alpha must
    // grow, below means it must shrink.
    double new_lo = alpha_lo;
    double new_hi = alpha_hi;
    for (int p = 0; p < n; ++p) {
      const CurvePoint& cp = points[static_cast<std::size_t>(p)];
      if (cp.per_capita_cost > target)
        new_lo = std::max(new_lo, cp.alpha);
      else
        new_hi = std::min(new_hi, cp.alpha);
    }
    alpha_lo = new_lo;
    alpha_hi = new_hi;
    if (alpha_hi < alpha_lo) std::swap(alpha_lo, alpha_hi);
  }
  return result;
}

std::vector<CurvePoint> cost_value_curve(const PredictionPair& pred,
                                         const RctBatch& batch,
                                         const std::vector<double>& alpha_grid) {
  check_shapes(pred, batch);
  if (alpha_grid.empty()) throw InvalidParams("alpha grid is empty");
  for (double a : alpha_grid)
    if (a < 0.0) throw NegativeAlpha("alpha grid entries must be >= 0");

  const AllocationIndex index(pred, batch);
  std::vector<CurvePoint> curve;
  curve.reserve(alpha_grid.size());
  for (double alpha : alpha_grid) {
    const EomOutcome eom = index.query(alpha);
    curve.push_back({alpha, eom.cost, eom.response, eom.matched_count});
  }
  return curve;
}

void save_curve(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "alpha,per_capita_cost,per_capita_response,matched_count\n";
  char buf[128];
  for (const CurvePoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%zu\n", p.alpha,
                  p.per_capita_cost, p.per_capita_response, p.matched_count);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<CurvePoint> load_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseFailure(path + " is empty");
  std::vector<CurvePoint> curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CurvePoint p;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    p.alpha = std::stod(field);
    std::getline(ss, field, ',');
    p.per_capita_cost = std::stod(field);
    std::getline(ss, field, ',');
    p.per_capita_response = std::stod(field);
    std::getline(ss, field, ',');
    p.matched_count = static_cast<std::size_t>(std::stoull(field));
    curve.push_back(p);
  }
  return curve;
}

OracleResult brute_force_oracle(const PredictionPair& pred,
                                double total_budget) {
  const std::size_t b = static_cast<std::size_t>(pred.rows());
  const int k = static_cast<int>(pred.cols());

  double combos = 1.0;
  for (std::size_t i = 0; i < b; ++i) {
    combos *= static_cast<double>(k);
    if (combos > 1e7)
      throw InstanceTooLarge("K^B exceeds 1e7; brute force refused");
  }

  double cheapest = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double row_min = pred.c(static_cast<Eigen::Index>(i), 0);
    for (int j = 1; j < k; ++j)
      row_min = std::min(row_min, pred.c(static_cast<Eigen::Index>(i), j));
    cheapest += row_min;
  }
  const double slack = 1e-9 * std::max(1.0, std::abs(total_budget));
  if (cheapest > total_budget + slack)
    throw Infeasible("cheapest allocation costs " + std::to_string(cheapest) +
                     " > budget " + std::to_string(total_budget));

  std::vector<int> choice(b, 0);
  OracleResult best;
  best.best_value = -kInf;
  best.best.num_treatments = k;

  while (true) {
    double value = 0.0;
    double cost = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      value += pred.v(static_cast<Eigen::Index>(i), choice[i]);
      cost += pred.c(static_cast<Eigen::Index>(i), choice[i]);
    }
    if (cost <= total_budget + slack && value > best.best_value) {
      best.best_value = value;
      best.best.choice = choice;
    }
    // Odometer increment over the K^B assignments.
    std::size_t pos = 0;
    while (pos < b) {
      if (++choice[pos] < k) break;
      choice[pos] = 0;
      ++pos;
    }
    if (pos == b) break;
  }
  return best;
}

}  // namespace budgetalloc
