#include "budgetalloc/gradest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "budgetalloc/parallel.hpp"
#include "budgetalloc/rng.hpp"

namespace budgetalloc {

namespace {

double clamp_entry(double value, Wrt wrt, bool* clamped) {
  double out = value;
  if (wrt == Wrt::kResponse) {
    out = std::clamp(value, 0.0, 1.0);
  } else {
    out = std::max(value, 0.0);
  }
  if (out != value) *clamped = true;
  return out;
}

/// Clamps a whole perturbed matrix in place; reports whether anything moved.
bool clamp_matrix(Eigen::MatrixXd& m, Wrt wrt) {
  bool clamped = false;
  double* data = m.data();
  const Eigen::Index n = m.size();
  for (Eigen::Index i = 0; i < n; ++i)
    data[i] = clamp_entry(data[i], wrt, &clamped);
  return clamped;
}

}  // namespace

GradEstimate estimate_grad_fd(const QFunction& q, const PredictionPair& pred,
                              const FdParams& params, Wrt wrt, int threads) {
  const Eigen::Index rows = pred.rows();
  const Eigen::Index cols = pred.cols();
  const std::size_t total = static_cast<std::size_t>(rows * cols);
  if (!(params.h > 0.0)) throw InvalidParams("h must be > 0");
  const std::size_t f = params.num_entries == 0 ? total : params.num_entries;
  if (f < 1 || f > total)
    throw InvalidParams("num_entries must be in [1, B*K]");

  RngStream mask_rng = RngStream::derive(params.seed, "fd_mask");
  const std::vector<std::size_t> mask =
      mask_rng.sample_without_replacement(total, f);

  const Eigen::MatrixXd& base =
      wrt == Wrt::kResponse ? pred.v : pred.c;
  const Eigen::MatrixXd& other =
      wrt == Wrt::kResponse ? pred.c : pred.v;

  std::vector<double> derivative(f, 0.0);
  std::vector<unsigned char> clamped(f, 0);
  const unsigned workers = resolve_threads(threads);

  parallel_for(f, workers, [&](std::size_t idx) {
    const std::size_t l = mask[idx];
    const Eigen::Index i = static_cast<Eigen::Index>(l) / cols;
    const Eigen::Index j = static_cast<Eigen::Index>(l) % cols;

    Eigen::MatrixXd perturbed = base;
    bool hit = false;
    perturbed(i, j) = clamp_entry(base(i, j) + params.h, wrt, &hit);
    const double q_plus = wrt == Wrt::kResponse ? q(perturbed, other)
                                                : q(other, perturbed);
    perturbed(i, j) = clamp_entry(base(i, j) - params.h, wrt, &hit);
    const double q_minus = wrt == Wrt::kResponse ? q(perturbed, other)
                                                 : q(other, perturbed);
    derivative[idx] = (q_plus - q_minus) / (2.0 * params.h);
    clamped[idx] = hit ? 1 : 0;
  });

  GradEstimate est;
  est.grad_v = Eigen::MatrixXd::Zero(rows, cols);
  est.grad_c = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::MatrixXd& grad = wrt == Wrt::kResponse ? est.grad_v : est.grad_c;
  for (std::size_t idx = 0; idx < f; ++idx) {
    const std::size_t l = mask[idx];
    grad(static_cast<Eigen::Index>(l) / cols,
         static_cast<Eigen::Index>(l) % cols) = derivative[idx];
    est.clamped_evaluations += clamped[idx] ? 2 : 0;
  }
  est.evaluations_used = 2 * f;
  return est;
}

GradEstimate estimate_grad_nes(const QFunction& q, const PredictionPair& pred,
                               const NesParams& params, Wrt wrt, int threads) {
  if (!(params.sigma > 0.0)) throw InvalidParams("sigma must be > 0");
  if (params.num_directions < 2 || params.num_directions % 2 != 0)
    throw InvalidParams("num_directions must be even and >= 2");

  const Eigen::Index rows = pred.rows();
  const Eigen::Index cols = pred.cols();
  const std::size_t pairs = params.num_directions / 2;
  const Eigen::MatrixXd& base = wrt == Wrt::kResponse ? pred.v : pred.c;
  const Eigen::MatrixXd& other = wrt == Wrt::kResponse ? pred.c : pred.v;
  const unsigned workers = resolve_threads(threads);

  // Directions are processed in blocks so the cached delta matrices stay
  // small; each direction has its own derived stream, so the block layout
  // does not affect the draw.
  const std::size_t block = std::min<std::size_t>(pairs, 32);
  std::vector<Eigen::MatrixXd> deltas(block);
  std::vector<double> diff(block, 0.0);
  std::vector<unsigned char> clamped(block, 0);

  GradEstimate est;
  est.grad_v = Eigen::MatrixXd::Zero(rows, cols);
  est.grad_c = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::MatrixXd& grad = wrt == Wrt::kResponse ? est.grad_v : est.grad_c;

  for (std::size_t start = 0; start < pairs; start += block) {
    const std::size_t stop = std::min(pairs, start + block);
    const std::size_t count = stop - start;

    parallel_for(count, workers, [&](std::size_t b) {
      RngStream dir_rng =
          RngStream::derive(params.seed, "nes_direction", start + b);
      Eigen::MatrixXd& delta = deltas[b];
      delta.resize(rows, cols);
      double* data = delta.data();
      for (Eigen::Index e = 0; e < delta.size(); ++e)
        data[e] = dir_rng.gaussian();

      Eigen::MatrixXd perturbed = base + params.sigma * delta;
      bool hit = clamp_matrix(perturbed, wrt);
      const double q_plus = wrt == Wrt::kResponse ? q(perturbed, other)
                                                  : q(other, perturbed);
      perturbed = base - params.sigma * delta;
      hit = clamp_matrix(perturbed, wrt) || hit;
      const double q_minus = wrt == Wrt::kResponse ? q(perturbed, other)
                                                   : q(other, perturbed);
      diff[b] = q_plus - q_minus;
      clamped[b] = hit ? 1 : 0;
    });

    for (std::size_t b = 0; b < count; ++b) {
      if (diff[b] != 0.0) grad.noalias() += diff[b] * deltas[b];
      est.clamped_evaluations += clamped[b] ? 2 : 0;
    }
  }

  grad /= params.sigma * static_cast<double>(params.num_directions);
  est.evaluations_used = params.num_directions;
  return est;
}

double cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch("cosine_similarity shapes differ");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine of a zero vector");
  const double dot = (a.array() * b.array()).sum();
  return dot / (na * nb);
}

QFunction make_q_function(const RctBatch& batch, const QEvalParams& params) {
  return [&batch, params](const Eigen::MatrixXd& v, const Eigen::MatrixXd& c) {
    PredictionPair pred{v, c};
    return evaluate_q(pred, batch, params).q;
  };
}

}  // namespace budgetalloc
