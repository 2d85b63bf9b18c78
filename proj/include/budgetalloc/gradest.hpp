#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>

#include "budgetalloc/allocator.hpp"
#include "budgetalloc/dataset.hpp"

namespace budgetalloc {

/// Black-box objective of a prediction pair, e.g. Q from evaluate_q.
using QFunction =
    std::function<double(const Eigen::MatrixXd& v, const Eigen::MatrixXd& c)>;

/// Which prediction matrix a gradient estimate is taken with respect to.
enum class Wrt { kResponse, kCost };

/// Masked symmetric-difference estimation controls. `num_entries` (F') is
/// how many of the B*K coordinates get estimated per call; the rest stay
/// zero.
struct FdParams {
  double h = 3e-4;
  std::size_t num_entries = 0;
  std::uint64_t seed = 0;
};

/// Antithetic NES controls. `num_directions` (N') must be even: directions
/// come in mirrored pairs.
struct NesParams {
  double sigma = 1e-3;
  std::size_t num_directions = 2000;
  std::uint64_t seed = 0;
};

struct GradEstimate {
  Eigen::MatrixXd grad_v;
  Eigen::MatrixXd grad_c;
  std::size_t evaluations_used = 0;
  std::size_t clamped_evaluations = 0;  // evals where a perturbation hit a bound
};

/// Estimates F' entries of dQ/dv (or dQ/dc) by the symmetric difference
/// quotient (q(x + h e_l) - q(x - h e_l)) / 2h at coordinates sampled
/// without replacement from the seed. Perturbed v entries are clamped to
/// [0, 1] and c entries to [0, inf) before q sees them; the caller's
/// matrices are never modified. Entry l of the flattened matrix is row-major
/// (l = i * K + j).
GradEstimate estimate_grad_fd(const QFunction& q, const PredictionPair& pred,
                              const FdParams& params, Wrt wrt, int threads = 1);

/// Antithetic NES estimate: draws N'/2 standard normal direction matrices,
/// mirrors them, and averages delta * q(x + sigma * delta) over all N'
/// directions (equivalently delta_i * (q_plus - q_minus) over pairs, which
/// makes the estimate exactly zero for constant q). Same clamping rules as
/// the finite-difference path.
GradEstimate estimate_grad_nes(const QFunction& q, const PredictionPair& pred,
                               const NesParams& params, Wrt wrt,
                               int threads = 1);

/// <a, b> / (|a| |b|) over flattened matrices.
double cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Q as a function of (v, c) against a fixed batch and evaluation params.
QFunction make_q_function(const RctBatch& batch, const QEvalParams& params);

}  // namespace budgetalloc
