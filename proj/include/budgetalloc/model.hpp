#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "budgetalloc/allocator.hpp"
#include "budgetalloc/dataset.hpp"
#include "budgetalloc/gradest.hpp"

namespace budgetalloc {

enum class CostLossKind { kBinary, kRegression };

/// Shared-trunk MLP with 2K heads: one response head and one cost head per
/// treatment. ReLU follows every fully connected layer except each head's
/// final output layer; response heads end in a sigmoid, cost heads in a
/// softplus.
struct ModelConfig {
  int feature_dim = 0;
  int num_treatments = 1;
  std::vector<int> trunk_layers{512, 256, 128, 64};
  std::vector<int> head_layers{32, 1};
  CostLossKind cost_loss = CostLossKind::kRegression;

  void validate() const;
};

struct Dense {
  Eigen::MatrixXd w;  // out x in
  Eigen::MatrixXd b;  // out x 1
};

struct ModelParams {
  ModelConfig config;
  std::vector<Dense> trunk;
  std::vector<std::vector<Dense>> response_heads;  // K stacks
  std::vector<std::vector<Dense>> cost_heads;      // K stacks

  void validate() const;
};

/// Flattened tensor traversal in a fixed order (trunk, then response heads,
/// then cost heads; weight before bias). Adam, serialization, and gradient
/// checks all walk parameters through this.
std::vector<Eigen::MatrixXd*> tensor_list(ModelParams& params);
std::vector<const Eigen::MatrixXd*> tensor_list(const ModelParams& params);

/// MSRA initialization: weights ~ N(0, 2/fan_in), biases zero.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

ModelParams zeros_like(const ModelParams& params);

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> trunk_pre;
  std::vector<Eigen::MatrixXd> trunk_act;
  std::vector<std::vector<Eigen::MatrixXd>> response_pre;
  std::vector<std::vector<Eigen::MatrixXd>> response_act;
  std::vector<std::vector<Eigen::MatrixXd>> cost_pre;
  std::vector<std::vector<Eigen::MatrixXd>> cost_act;
};

PredictionPair forward(const ModelParams& params,
                       const Eigen::MatrixXd& features);
PredictionPair forward_cached(const ModelParams& params,
                              const Eigen::MatrixXd& features,
                              ForwardCache& cache);

/// Exact reverse-mode gradients of the trunk/head composition against the
/// supplied output gradients dL/dv and dL/dc.
ModelParams backward(const ModelParams& params, const ForwardCache& cache,
                     const Eigen::MatrixXd& grad_v,
                     const Eigen::MatrixXd& grad_c);

struct SlLoss {
  double loss = 0.0;
  Eigen::MatrixXd grad_v;  // nonzero only at the observed-treatment entries
  Eigen::MatrixXd grad_c;
};

/// Batch mean of cross-entropy on the observed response plus the cost loss
/// (binary cross-entropy or squared error) on the observed cost, each
/// evaluated only at the logged treatment's column. Probabilities are
/// clamped to [1e-7, 1 - 1e-7] inside the logs.
SlLoss sl_loss(const PredictionPair& pred, const RctBatch& batch,
               CostLossKind kind);

/// Gradients of the surrogate objective: the sl gradients minus lambda times
/// the detached Q-gradient estimates. Linear in both, which is exactly the
/// derivative of loss - lambda * (tr(v^T G_v) + tr(c^T G_c)) with G held
/// constant.
SlLoss surrogate_grads(const PredictionPair& pred, const SlLoss& sl,
                       const GradEstimate& q_grads, double lambda);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long step = 0;
  AdamConfig config;
};

AdamState init_adam(const ModelParams& params, AdamConfig config = {});

/// One Adam update with bias correction, in place.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               double learning_rate);

/// Adam over a single free matrix (used for direct ascent on v).
struct MatrixAdam {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
  long step = 0;
  AdamConfig config;

  explicit MatrixAdam(Eigen::Index rows = 0, Eigen::Index cols = 0,
                      AdamConfig cfg = {});
  void update(Eigen::MatrixXd& x, const Eigen::MatrixXd& grad,
              double learning_rate);
};

}  // namespace budgetalloc
