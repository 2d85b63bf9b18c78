#include "budgetalloc/train.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "budgetalloc/rng.hpp"

namespace budgetalloc {

using nlohmann::json;

void TrainConfig::validate() const {
  if (lambda < 0.0) throw InvalidParams("lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw InvalidParams("learning_rate must be > 0");
  if (epochs < 1) throw InvalidParams("epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs > epochs)
    throw InvalidParams("warmup_epochs must be in [0, epochs]");
  if (batch_size < 1) throw InvalidParams("batch_size must be >= 1");
  if (budget_lo > budget_hi)
    throw InvalidParams("budget_lo must be <= budget_hi");
  if (lambda > 0.0 && !(budget_lo >= 0.0))
    throw InvalidParams("per-capita budgets must be >= 0");
}

TrainResult train(const RctDataset& dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config,
                  const EpochCallback& on_epoch) {
  train_config.validate();
  model_config.validate();
  if (dataset.feature_dim() < 1)
    throw ZeroFeatureDim("training needs a featured dataset");
  if (dataset.feature_dim() != model_config.feature_dim)
    throw ShapeMismatch("dataset feature_dim != model feature_dim");
  if (dataset.num_treatments != model_config.num_treatments)
    throw ShapeMismatch("dataset num_treatments != model num_treatments");

  TrainResult result;
  result.params = init_params(model_config, train_config.seed);
  result.adam = init_adam(result.params);

  long global_step = 0;
  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    const std::uint64_t shuffle_seed =
        RngStream::derive(train_config.seed, "epoch_shuffle",
                          static_cast<std::uint64_t>(epoch))
            .next_u64();
    for (RctBatch& batch :
         batches(dataset, train_config.batch_size, shuffle_seed)) {
      ForwardCache cache;
      PredictionPair pred;
      try {
        pred = forward_cached(result.params, batch.features, cache);
      } catch (const NonFiniteActivation& e) {
        StepRecord failed;
        failed.epoch = epoch;
        failed.step = global_step;
        failed.sl_loss = std::nan("");
        result.log.push_back(failed);
        throw NonFiniteActivation(std::string(e.what()) + " at step " +
                                  std::to_string(global_step));
      }

      const SlLoss sl = sl_loss(pred, batch, model_config.cost_loss);
      StepRecord record;
      record.epoch = epoch;
      record.step = global_step;
      record.sl_loss = sl.loss;

      SlLoss combined = sl;
      const bool regularize =
          train_config.lambda > 0.0 && epoch >= train_config.warmup_epochs;
      if (regularize) {
        const double per_capita_budget =
            RngStream::derive(train_config.seed, "budget",
                              static_cast<std::uint64_t>(global_step))
                .uniform(train_config.budget_lo, train_config.budget_hi);
        QEvalParams q_params = train_config.q_eval;
        q_params.total_budget =
            per_capita_budget * static_cast<double>(batch.size());
        // Literal bisection inside training: an untrained model cannot meet
        // the budget yet, and aborting here would make end-to-end training
        // from scratch impossible.
        q_params.check_feasibility = false;
        const QFunction q = make_q_function(batch, q_params);

        GradEstimate merged;
        if (train_config.estimator == GradEstimatorKind::kFiniteDifference) {
          FdParams fd = train_config.fd;
          fd.seed = RngStream::derive(train_config.seed, "fd",
                                      static_cast<std::uint64_t>(global_step))
                        .next_u64();
          merged = estimate_grad_fd(q, pred, fd, Wrt::kResponse,
                                    train_config.threads);
          if (train_config.regularize_cost) {
            fd.seed = RngStream::derive(train_config.seed, "fd_cost",
                                        static_cast<std::uint64_t>(global_step))
                          .next_u64();
            const GradEstimate cost_est = estimate_grad_fd(
                q, pred, fd, Wrt::kCost, train_config.threads);
            merged.grad_c = cost_est.grad_c;
            merged.evaluations_used += cost_est.evaluations_used;
            merged.clamped_evaluations += cost_est.clamped_evaluations;
          }
        } else {
          NesParams nes = train_config.nes;
          nes.seed = RngStream::derive(train_config.seed, "nes",
                                       static_cast<std::uint64_t>(global_step))
                         .next_u64();
          merged = estimate_grad_nes(q, pred, nes, Wrt::kResponse,
                                     train_config.threads);
          if (train_config.regularize_cost) {
            nes.seed =
                RngStream::derive(train_config.seed, "nes_cost",
                                  static_cast<std::uint64_t>(global_step))
                    .next_u64();
            const GradEstimate cost_est = estimate_grad_nes(
                q, pred, nes, Wrt::kCost, train_config.threads);
            merged.grad_c = cost_est.grad_c;
            merged.evaluations_used += cost_est.evaluations_used;
            merged.clamped_evaluations += cost_est.clamped_evaluations;
          }
        }

        combined = surrogate_grads(pred, sl, merged, train_config.lambda);
        const QResult q_now = evaluate_q(pred, batch, q_params);
        record.q = q_now.q;
        record.alpha_final = q_now.alpha_final;
        record.per_capita_budget = per_capita_budget;
        record.evaluations_used = merged.evaluations_used;
        record.clamped_evaluations = merged.clamped_evaluations;
      }

      const ModelParams grads =
          backward(result.params, cache, combined.grad_v, combined.grad_c);
      adam_step(result.params, grads, result.adam, train_config.learning_rate);
      result.log.push_back(record);
      ++global_step;
    }
    if (on_epoch) on_epoch(result, epoch);
  }
  return result;
}

void save_train_log(const std::vector<StepRecord>& log,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const StepRecord& r : log) {
    json j{{"epoch", r.epoch},
           {"step", r.step},
           {"sl_loss", r.sl_loss},
           {"evaluations_used", r.evaluations_used},
           {"clamped_evaluations", r.clamped_evaluations}};
    if (r.q) j["q"] = *r.q;
    if (r.alpha_final) j["alpha_final"] = *r.alpha_final;
    if (r.per_capita_budget) j["per_capita_budget"] = *r.per_capita_budget;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

AscentResult gradient_ascent_on_matrix(const Eigen::MatrixXd& v0,
                                       const Eigen::MatrixXd& c,
                                       const RctBatch& batch,
                                       const QEvalParams& q_params,
                                       const NesParams& nes_params, int steps,
                                       double learning_rate, int threads) {
  if (steps < 0) throw InvalidParams("steps must be >= 0");
  if ((v0.array() < 0.0).any() || (v0.array() > 1.0).any())
    throw InvalidParams("v0 entries must lie in [0, 1]");

  AscentResult result;
  result.v_final = v0;
  MatrixAdam adam(v0.rows(), v0.cols());

  auto record = [&](const Eigen::MatrixXd& v) {
    const QResult q = evaluate_q({v, c}, batch, q_params);
    result.q_trace.push_back(q.q);
    result.alpha_trace.push_back(q.alpha_final);
  };
  record(result.v_final);

  for (int step = 0; step < steps; ++step) {
    NesParams nes = nes_params;
    nes.seed = RngStream::derive(nes_params.seed, "ascent_nes",
                                 static_cast<std::uint64_t>(step))
                   .next_u64();
    const QFunction q = make_q_function(batch, q_params);
    const PredictionPair pred{result.v_final, c};
    const GradEstimate est =
        estimate_grad_nes(q, pred, nes, Wrt::kResponse, threads);
    // Ascent: step against the negated estimate.
    adam.update(result.v_final, -est.grad_v, learning_rate);
    result.v_final = result.v_final.cwiseMax(0.0).cwiseMin(1.0);
    record(result.v_final);
  }
  return result;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(),
                    j.at("cols").get<Eigen::Index>());
  const json& data = j.at("data");
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index jj = 0; jj < m.cols(); ++jj)
      m(i, jj) = data.at(static_cast<std::size_t>(i))
                     .at(static_cast<std::size_t>(jj))
                     .get<double>();
  return m;
}

json config_to_json(const ModelConfig& c) {
  return json{{"feature_dim", c.feature_dim},
              {"num_treatments", c.num_treatments},
              {"trunk_layers", c.trunk_layers},
              {"head_layers", c.head_layers},
              {"cost_loss",
               c.cost_loss == CostLossKind::kBinary ? "binary" : "regression"}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.num_treatments = j.at("num_treatments").get<int>();
  c.trunk_layers = j.at("trunk_layers").get<std::vector<int>>();
  c.head_layers = j.at("head_layers").get<std::vector<int>>();
  c.cost_loss = j.at("cost_loss").get<std::string>() == "binary"
                    ? CostLossKind::kBinary
                    : CostLossKind::kRegression;
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  json tensors = json::array();
  for (const auto* t : tensor_list(checkpoint.params))
    tensors.push_back(matrix_to_json(*t));
  json adam_m = json::array();
  json adam_v = json::array();
  for (const auto& m : checkpoint.adam.m) adam_m.push_back(matrix_to_json(m));
  for (const auto& v : checkpoint.adam.v) adam_v.push_back(matrix_to_json(v));

  const json j{{"format_version", 1},
               {"model", config_to_json(checkpoint.params.config)},
               {"tensors", std::move(tensors)},
               {"adam",
                {{"m", std::move(adam_m)},
                 {"v", std::move(adam_v)},
                 {"step", checkpoint.adam.step},
                 {"beta1", checkpoint.adam.config.beta1},
                 {"beta2", checkpoint.adam.config.beta2},
                 {"epsilon", checkpoint.adam.config.epsilon}}},
               {"rng",
                {{"seed", checkpoint.seed},
                 {"completed_steps", checkpoint.completed_steps},
                 {"completed_epochs", checkpoint.completed_epochs}}}};

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  in >> j;
  if (j.at("format_version").get<int>() != 1)
    throw ParseFailure("unsupported checkpoint version in " + path);

  Checkpoint checkpoint;
  const ModelConfig config = config_from_json(j.at("model"));
  // Rebuild the parameter skeleton, then overwrite every tensor.
  checkpoint.params = init_params(config, 0);
  auto targets = tensor_list(checkpoint.params);
  const json& tensors = j.at("tensors");
  if (tensors.size() != targets.size())
    throw ParseFailure("tensor count mismatch in " + path);
  for (std::size_t i = 0; i < targets.size(); ++i)
    *targets[i] = matrix_from_json(tensors.at(i));

  const json& adam = j.at("adam");
  checkpoint.adam.config.beta1 = adam.at("beta1").get<double>();
  checkpoint.adam.config.beta2 = adam.at("beta2").get<double>();
  checkpoint.adam.config.epsilon = adam.at("epsilon").get<double>();
  checkpoint.adam.step = adam.at("step").get<long>();
  for (const json& m : adam.at("m")) checkpoint.adam.m.push_back(matrix_from_json(m));
  for (const json& v : adam.at("v")) checkpoint.adam.v.push_back(matrix_from_json(v));

  const json& rng = j.at("rng");
  checkpoint.seed = rng.at("seed").get<std::uint64_t>();
  checkpoint.completed_steps = rng.at("completed_steps").get<long>();
  checkpoint.completed_epochs = rng.at("completed_epochs").get<int>();
  checkpoint.params.validate();
  return checkpoint;
}

}  // namespace budgetalloc
