#include "budgetalloc/model.hpp"

#include <cmath>

#include "budgetalloc/rng.hpp"

namespace budgetalloc {

namespace {

constexpr double kProbEps = 1e-7;

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return 1.0 / (1.0 + (-z.array()).exp());
}

double softplus_scalar(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

Eigen::MatrixXd softplus(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double x) { return softplus_scalar(x); });
}

Eigen::MatrixXd affine(const Dense& layer, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd z = a * layer.w.transpose();
  z.rowwise() += layer.b.col(0).transpose();
  return z;
}

/// Head stack forward: ReLU between layers, raw output from the last.
Eigen::MatrixXd head_forward(const std::vector<Dense>& head,
                             const Eigen::MatrixXd& h,
                             std::vector<Eigen::MatrixXd>* pre,
                             std::vector<Eigen::MatrixXd>* act) {
  Eigen::MatrixXd a = h;
  for (std::size_t l = 0; l < head.size(); ++l) {
    Eigen::MatrixXd z = affine(head[l], a);
    if (pre) pre->push_back(z);
    if (l + 1 < head.size()) {
      a = relu(z);
      if (act) act->push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

/// Head stack backward from dL/d(raw output); returns dL/d(head input) and
/// fills the gradient stack.
Eigen::MatrixXd head_backward(const std::vector<Dense>& head,
                              const std::vector<Eigen::MatrixXd>& pre,
                              const std::vector<Eigen::MatrixXd>& act,
                              const Eigen::MatrixXd& trunk_out,
                              Eigen::MatrixXd d_out,
                              std::vector<Dense>& grads) {
  for (std::size_t l = head.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = l == 0 ? trunk_out : act[l - 1];
    grads[l].w = d_out.transpose() * input;
    grads[l].b = d_out.colwise().sum().transpose();
    Eigen::MatrixXd d_in = d_out * head[l].w;
    if (l > 0) {
      d_in.array() *= (pre[l - 1].array() > 0.0).cast<double>();
    }
    d_out = std::move(d_in);
  }
  return d_out;
}

}  // namespace

void ModelConfig::validate() const {
  if (feature_dim < 1) throw ZeroFeatureDim("model needs feature_dim >= 1");
  if (num_treatments < 1) throw InvalidK("model needs num_treatments >= 1");
  if (trunk_layers.empty()) throw InvalidParams("trunk_layers is empty");
  for (int s : trunk_layers)
    if (s < 1) throw InvalidParams("trunk layer sizes must be >= 1");
  if (head_layers.empty()) throw InvalidParams("head_layers is empty");
  for (int s : head_layers)
    if (s < 1) throw InvalidParams("head layer sizes must be >= 1");
  if (head_layers.back() != 1)
    throw InvalidParams("final head layer must have size 1");
}

void ModelParams::validate() const {
  config.validate();
  for (const auto* t : tensor_list(*this))
    if (!t->allFinite()) throw NonFiniteActivation("non-finite parameter");
}

std::vector<Eigen::MatrixXd*> tensor_list(ModelParams& params) {
  std::vector<Eigen::MatrixXd*> out;
  for (auto& layer : params.trunk) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  for (auto* heads : {&params.response_heads, &params.cost_heads})
    for (auto& head : *heads)
      for (auto& layer : head) {
        out.push_back(&layer.w);
        out.push_back(&layer.b);
      }
  return out;
}

std::vector<const Eigen::MatrixXd*> tensor_list(const ModelParams& params) {
  std::vector<const Eigen::MatrixXd*> out;
  for (const auto& layer : params.trunk) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  for (const auto* heads : {&params.response_heads, &params.cost_heads})
    for (const auto& head : *heads)
      for (const auto& layer : head) {
        out.push_back(&layer.w);
        out.push_back(&layer.b);
      }
  return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params;
  params.config = config;

  RngStream rng = RngStream::derive(seed, "init");
  auto make_dense = [&rng](int out, int in) {
    Dense layer;
    layer.w.resize(out, in);
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
        layer.w(r, c) = sd * rng.gaussian();
    layer.b = Eigen::MatrixXd::Zero(out, 1);
    return layer;
  };

  int in = config.feature_dim;
  for (int size : config.trunk_layers) {
    params.trunk.push_back(make_dense(size, in));
    in = size;
  }
  const int trunk_out = in;
  for (auto* heads : {&params.response_heads, &params.cost_heads}) {
    for (int k = 0; k < config.num_treatments; ++k) {
      std::vector<Dense> head;
      int hin = trunk_out;
      for (int size : config.head_layers) {
        head.push_back(make_dense(size, hin));
        hin = size;
      }
      heads->push_back(std::move(head));
    }
  }
  return params;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out = params;
  for (auto* t : tensor_list(out)) t->setZero();
  return out;
}

PredictionPair forward_cached(const ModelParams& params,
                              const Eigen::MatrixXd& features,
                              ForwardCache& cache) {
  if (features.cols() != params.config.feature_dim)
    throw ShapeMismatch("feature dim does not match model config");
  const int k = params.config.num_treatments;
  const Eigen::Index batch = features.rows();

  cache = ForwardCache{};
  cache.input = features;
  Eigen::MatrixXd a = features;
  for (const Dense& layer : params.trunk) {
    Eigen::MatrixXd z = affine(layer, a);
    cache.trunk_pre.push_back(z);
    a = relu(z);
    cache.trunk_act.push_back(a);
  }

  PredictionPair pred;
  pred.v.resize(batch, k);
  pred.c.resize(batch, k);
  cache.response_pre.resize(static_cast<std::size_t>(k));
  cache.response_act.resize(static_cast<std::size_t>(k));
  cache.cost_pre.resize(static_cast<std::size_t>(k));
  cache.cost_act.resize(static_cast<std::size_t>(k));
  for (int h = 0; h < k; ++h) {
    const std::size_t hs = static_cast<std::size_t>(h);
    const Eigen::MatrixXd raw_v =
        head_forward(params.response_heads[hs], a, &cache.response_pre[hs],
                     &cache.response_act[hs]);
    const Eigen::MatrixXd raw_c = head_forward(
        params.cost_heads[hs], a, &cache.cost_pre[hs], &cache.cost_act[hs]);
    pred.v.col(h) = sigmoid(raw_v).col(0);
    pred.c.col(h) = softplus(raw_c).col(0);
  }
  if (!pred.v.allFinite() || !pred.c.allFinite())
    throw NonFiniteActivation("forward produced a non-finite prediction");
  return pred;
}

PredictionPair forward(const ModelParams& params,
                       const Eigen::MatrixXd& features) {
  ForwardCache cache;
  return forward_cached(params, features, cache);
}

ModelParams backward(const ModelParams& params, const ForwardCache& cache,
                     const Eigen::MatrixXd& grad_v,
                     const Eigen::MatrixXd& grad_c) {
  const int k = params.config.num_treatments;
  if (grad_v.cols() != k || grad_c.cols() != k ||
      grad_v.rows() != cache.input.rows() || grad_c.rows() != cache.input.rows())
    throw ShapeMismatch("output gradient shape mismatch");

  ModelParams grads = zeros_like(params);
  const Eigen::MatrixXd& trunk_out = cache.trunk_act.back();
  Eigen::MatrixXd d_trunk_out =
      Eigen::MatrixXd::Zero(trunk_out.rows(), trunk_out.cols());

  for (int h = 0; h < k; ++h) {
    const std::size_t hs = static_cast<std::size_t>(h);
    // d/dz sigmoid(z) = s(1-s); d/dz softplus(z) = sigmoid(z).
    const Eigen::ArrayXd s =
        sigmoid(cache.response_pre[hs].back()).col(0).array();
    Eigen::MatrixXd d_raw_v =
        (grad_v.col(h).array() * s * (1.0 - s)).matrix();
    const Eigen::ArrayXd sp =
        sigmoid(cache.cost_pre[hs].back()).col(0).array();
    Eigen::MatrixXd d_raw_c = (grad_c.col(h).array() * sp).matrix();

    d_trunk_out += head_backward(params.response_heads[hs],
                                 cache.response_pre[hs], cache.response_act[hs],
                                 trunk_out, std::move(d_raw_v),
                                 grads.response_heads[hs]);
    d_trunk_out += head_backward(params.cost_heads[hs], cache.cost_pre[hs],
                                 cache.cost_act[hs], trunk_out,
                                 std::move(d_raw_c), grads.cost_heads[hs]);
  }

  Eigen::MatrixXd d_act = std::move(d_trunk_out);
  for (std::size_t l = params.trunk.size(); l-- > 0;) {
    Eigen::MatrixXd d_pre =
        (d_act.array() * (cache.trunk_pre[l].array() > 0.0).cast<double>())
            .matrix();
    const Eigen::MatrixXd& input = l == 0 ? cache.input : cache.trunk_act[l - 1];
    grads.trunk[l].w = d_pre.transpose() * input;
    grads.trunk[l].b = d_pre.colwise().sum().transpose();
    if (l > 0) d_act = d_pre * params.trunk[l].w;
  }
  return grads;
}

SlLoss sl_loss(const PredictionPair& pred, const RctBatch& batch,
               CostLossKind kind) {
  if (static_cast<std::size_t>(pred.rows()) != batch.size())
    throw ShapeMismatch("prediction rows != batch size");
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  SlLoss out;
  out.grad_v = Eigen::MatrixXd::Zero(pred.rows(), pred.cols());
  out.grad_c = Eigen::MatrixXd::Zero(pred.rows(), pred.cols());

  auto cross_entropy = [](double p, double y, double* dloss_dp) {
    const double clamped = std::min(1.0 - kProbEps, std::max(kProbEps, p));
    const double loss = -(y * std::log(clamped) +
                          (1.0 - y) * std::log(1.0 - clamped));
    // Zero slope outside the clamp range.
    *dloss_dp = (p == clamped)
                    ? (clamped - y) / (clamped * (1.0 - clamped))
                    : 0.0;
    return loss;
  };

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    const int t = batch.treatments[i];
    const double y = batch.responses[i];
    const double z = batch.costs[i];

    double dv = 0.0;
    out.loss += cross_entropy(pred.v(row, t), y, &dv);
    out.grad_v(row, t) = dv * inv_b;

    const double c = pred.c(row, t);
    if (kind == CostLossKind::kBinary) {
      double dc = 0.0;
      out.loss += cross_entropy(c, z, &dc);
      out.grad_c(row, t) = dc * inv_b;
    } else {
      out.loss += (c - z) * (c - z);
      out.grad_c(row, t) = 2.0 * (c - z) * inv_b;
    }
  }
  out.loss *= inv_b;
  return out;
}

SlLoss surrogate_grads(const PredictionPair& pred, const SlLoss& sl,
                       const GradEstimate& q_grads, double lambda) {
  if (sl.grad_v.rows() != pred.rows() || sl.grad_v.cols() != pred.cols() ||
      q_grads.grad_v.rows() != pred.rows() ||
      q_grads.grad_v.cols() != pred.cols() ||
      q_grads.grad_c.rows() != pred.rows() ||
      q_grads.grad_c.cols() != pred.cols())
    throw ShapeMismatch("surrogate gradient shape mismatch");
  SlLoss out;
  out.loss = sl.loss;
  out.grad_v = sl.grad_v - lambda * q_grads.grad_v;
  out.grad_c = sl.grad_c - lambda * q_grads.grad_c;
  return out;
}

AdamState init_adam(const ModelParams& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const auto* t : tensor_list(params)) {
    state.m.push_back(Eigen::MatrixXd::Zero(t->rows(), t->cols()));
    state.v.push_back(Eigen::MatrixXd::Zero(t->rows(), t->cols()));
  }
  return state;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               double learning_rate) {
  auto targets = tensor_list(params);
  auto sources = tensor_list(grads);
  if (targets.size() != sources.size() || targets.size() != state.m.size())
    throw ShapeMismatch("adam state does not match parameters");

  state.step += 1;
  const AdamConfig& cfg = state.config;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t idx = 0; idx < targets.size(); ++idx) {
    const Eigen::MatrixXd& g = *sources[idx];
    state.m[idx] = cfg.beta1 * state.m[idx] + (1.0 - cfg.beta1) * g;
    state.v[idx] =
        cfg.beta2 * state.v[idx].array().matrix() +
        (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXXd m_hat = state.m[idx].array() / bc1;
    const Eigen::ArrayXXd v_hat = state.v[idx].array() / bc2;
    targets[idx]->array() -=
        learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
  }
}

MatrixAdam::MatrixAdam(Eigen::Index rows, Eigen::Index cols, AdamConfig cfg)
    : m(Eigen::MatrixXd::Zero(rows, cols)),
      v(Eigen::MatrixXd::Zero(rows, cols)),
      config(cfg) {}

void MatrixAdam::update(Eigen::MatrixXd& x, const Eigen::MatrixXd& grad,
                        double learning_rate) {
  if (grad.rows() != x.rows() || grad.cols() != x.cols() ||
      m.rows() != x.rows() || m.cols() != x.cols())
    throw ShapeMismatch("adam buffer does not match matrix");
  step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  m = config.beta1 * m + (1.0 - config.beta1) * grad;
  v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
  const Eigen::ArrayXXd m_hat = m.array() / bc1;
  const Eigen::ArrayXXd v_hat = v.array() / bc2;
  x.array() -= learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
}

}  // namespace budgetalloc
