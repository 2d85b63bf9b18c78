#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "budgetalloc/dataset.hpp"
#include "budgetalloc/gradest.hpp"
#include "budgetalloc/model.hpp"

namespace budgetalloc {

enum class GradEstimatorKind { kFiniteDifference, kNes };

/// End-to-end training controls. With lambda = 0 this is plain supervised
/// training of the response/cost heads (the two-stage baseline); with
/// lambda > 0 every step also estimates dQ/dv (and dQ/dc unless disabled)
/// at a per-capita budget drawn uniformly from [budget_lo, budget_hi] and
/// folds the detached estimates into the output gradients.
struct TrainConfig {
  double lambda = 0.0;
  double learning_rate = 1e-3;
  int epochs = 1;
  int warmup_epochs = 0;  // leading epochs trained with the regularizer off
  std::size_t batch_size = 10000;
  double budget_lo = 0.0;  // per-capita
  double budget_hi = 0.0;
  GradEstimatorKind estimator = GradEstimatorKind::kNes;
  FdParams fd;
  NesParams nes;
  QEvalParams q_eval;  // total_budget is overwritten per step
  bool regularize_cost = true;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct StepRecord {
  int epoch = 0;
  long step = 0;  // global step index
  double sl_loss = 0.0;
  std::optional<double> q;
  std::optional<double> alpha_final;
  std::optional<double> per_capita_budget;
  std::size_t evaluations_used = 0;
  std::size_t clamped_evaluations = 0;
};

struct TrainResult {
  ModelParams params;
  AdamState adam;
  std::vector<StepRecord> log;
};

/// Called after each completed epoch, e.g. to write a checkpoint.
using EpochCallback = std::function<void(const TrainResult&, int epoch)>;

/// Algorithm: per batch, forward; if lambda > 0 estimate the Q gradients
/// against the batch at a sampled budget; combine with the supervised
/// gradients; backpropagate; Adam step. Deterministic given the config seed.
TrainResult train(const RctDataset& dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config,
                  const EpochCallback& on_epoch = nullptr);

/// One JSON object per step record.
void save_train_log(const std::vector<StepRecord>& log, const std::string& path);

struct AscentResult {
  Eigen::MatrixXd v_final;
  std::vector<double> q_trace;      // steps + 1 entries, starting at Q(v0)
  std::vector<double> alpha_trace;  // alpha_final per trace entry
};

/// Adam gradient ascent directly on the response matrix with costs held
/// fixed, clamping v to [0, 1] after every step. The NES seed stream is
/// re-derived per step index.
AscentResult gradient_ascent_on_matrix(const Eigen::MatrixXd& v0,
                                       const Eigen::MatrixXd& c,
                                       const RctBatch& batch,
                                       const QEvalParams& q_params,
                                       const NesParams& nes_params, int steps,
                                       double learning_rate, int threads = 1);

/// Versioned JSON checkpoint: model config, all parameter tensors, optimizer
/// state, and the RNG bookkeeping needed to identify the run. Values are
/// serialized so a reload is bit-identical.
struct Checkpoint {
  ModelParams params;
  AdamState adam;
  std::uint64_t seed = 0;
  long completed_steps = 0;
  int completed_epochs = 0;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace budgetalloc
