#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "budgetalloc/allocator.hpp"
#include "budgetalloc/dataset.hpp"
#include "budgetalloc/error.hpp"
#include "budgetalloc/gradest.hpp"
#include "budgetalloc/metrics.hpp"
#include "budgetalloc/model.hpp"
#include "budgetalloc/rng.hpp"
#include "budgetalloc/synthetic.hpp"
#include "budgetalloc/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace budgetalloc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::uint64_t config_hash(const json& config) {
  return RngStream::fnv1a(config.dump());
}

std::string hash_string(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Writes through a temp file and renames, so readers never see partial
/// output and interrupted runs keep the previous version.
void atomic_write_text(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <typename WriteFn>
void atomic_write_file(const fs::path& path, const WriteFn& write) {
  const fs::path tmp = path.string() + ".tmp";
  write(tmp.string());
  fs::rename(tmp, path);
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json config;
  try {
    in >> config;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config;
}

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  bool strict_determinism = false;
};

struct Experiment {
  json config;
  std::uint64_t seed = 0;
  fs::path out_dir;
  int threads = 1;
};

Experiment prepare(const CommonOptions& options) {
  Experiment exp;
  exp.config = load_config(options.config_path);
  if (options.seed_override) exp.config["seed"] = *options.seed_override;
  if (options.out_override) exp.config["out_dir"] = *options.out_override;

  if (!exp.config.contains("seed") || !exp.config["seed"].is_number())
    throw ConfigError("config requires an integer 'seed' (no wall-clock seeding)");
  exp.seed = exp.config["seed"].get<std::uint64_t>();
  if (!exp.config.contains("out_dir"))
    throw ConfigError("config requires 'out_dir' (or pass --out)");
  exp.out_dir = exp.config["out_dir"].get<std::string>();
  exp.threads = exp.config.value("threads", 1);
  if (options.strict_determinism) exp.threads = 1;
  return exp;
}

DatasetSchema parse_schema(const json& s) {
  DatasetSchema schema;
  schema.treatment_column = s.value("treatment", "treatment");
  schema.response_column = s.value("response", "response");
  schema.cost_column = s.value("cost", "cost");
  if (s.contains("features"))
    schema.feature_columns = s["features"].get<std::vector<std::string>>();
  schema.packed_feature_column = s.value("packed_feature_column", "");
  schema.zero_based_treatments = s.value("zero_based_treatments", false);
  if (s.contains("num_treatments") && !s["num_treatments"].is_null())
    schema.num_treatments = s["num_treatments"].get<int>();
  return schema;
}

struct SyntheticSpec {
  std::string kind;  // "featureless" | "featured"
  std::size_t n = 0;
  int num_treatments = 4;
  int feature_dim = 0;
};

SyntheticSpec parse_synthetic(const json& s) {
  SyntheticSpec spec;
  spec.kind = s.value("kind", "featureless");
  if (spec.kind != "featureless" && spec.kind != "featured")
    throw ConfigError("synthetic.kind must be 'featureless' or 'featured'");
  if (!s.contains("n")) throw ConfigError("synthetic.n is required");
  spec.n = s["n"].get<std::size_t>();
  spec.num_treatments = s.value("num_treatments", 4);
  spec.feature_dim = s.value("feature_dim", 0);
  if (spec.kind == "featured" && spec.feature_dim < 1)
    throw ConfigError("featured synthetic data needs feature_dim >= 1");
  return spec;
}

QEvalParams parse_q_eval(const json& config) {
  QEvalParams params;
  if (!config.contains("q_eval")) return params;
  const json& q = config["q_eval"];
  params.max_iters = q.value("max_iters", params.max_iters);
  params.alpha_max = q.value("alpha_max", params.alpha_max);
  params.tolerance = q.value("tolerance", params.tolerance);
  params.search_points = q.value("search_points", params.search_points);
  params.check_feasibility =
      q.value("check_feasibility", params.check_feasibility);
  params.validate();
  return params;
}

ModelConfig parse_model(const json& config, int feature_dim, int num_treatments) {
  ModelConfig mc;
  mc.feature_dim = feature_dim;
  mc.num_treatments = num_treatments;
  if (config.contains("model")) {
    const json& m = config["model"];
    if (m.contains("trunk_layers"))
      mc.trunk_layers = m["trunk_layers"].get<std::vector<int>>();
    if (m.contains("head_layers"))
      mc.head_layers = m["head_layers"].get<std::vector<int>>();
    const std::string loss = m.value("cost_loss", "regression");
    if (loss != "regression" && loss != "binary")
      throw ConfigError("model.cost_loss must be 'regression' or 'binary'");
    mc.cost_loss =
        loss == "binary" ? CostLossKind::kBinary : CostLossKind::kRegression;
  }
  mc.validate();
  return mc;
}

FdParams parse_fd(const json& t) {
  FdParams fd;
  if (t.contains("fd")) {
    fd.h = t["fd"].value("h", fd.h);
    fd.num_entries = t["fd"].value("num_entries", fd.num_entries);
  }
  return fd;
}

NesParams parse_nes(const json& t) {
  NesParams nes;
  if (t.contains("nes")) {
    nes.sigma = t["nes"].value("sigma", nes.sigma);
    nes.num_directions = t["nes"].value("num_directions", nes.num_directions);
  }
  return nes;
}

TrainConfig parse_train(const json& config, std::uint64_t seed, int threads) {
  if (!config.contains("train")) throw ConfigError("config requires 'train'");
  const json& t = config["train"];
  TrainConfig tc;
  tc.lambda = t.value("lambda", 0.0);
  tc.learning_rate = t.value("learning_rate", 1e-3);
  tc.epochs = t.value("epochs", 1);
  tc.warmup_epochs = t.value("warmup_epochs", 0);
  tc.batch_size = t.value("batch_size", static_cast<std::size_t>(10000));
  if (t.contains("budget_range")) {
    const auto range = t["budget_range"].get<std::vector<double>>();
    if (range.size() != 2) throw ConfigError("train.budget_range must be [lo, hi]");
    tc.budget_lo = range[0];
    tc.budget_hi = range[1];
  }
  const std::string estimator = t.value("estimator", "nes");
  if (estimator == "nes")
    tc.estimator = GradEstimatorKind::kNes;
  else if (estimator == "fd")
    tc.estimator = GradEstimatorKind::kFiniteDifference;
  else
    throw ConfigError("train.estimator must be 'nes' or 'fd'");
  tc.fd = parse_fd(t);
  tc.nes = parse_nes(t);
  tc.q_eval = parse_q_eval(config);
  tc.regularize_cost = t.value("regularize_cost", true);
  tc.seed = seed;
  tc.threads = threads;
  tc.validate();
  return tc;
}

/// Materializes the configured dataset: either from disk or generated.
RctDataset resolve_dataset(const json& config, std::uint64_t seed) {
  const bool has_path =
      config.contains("dataset") && config["dataset"].contains("path");
  const bool has_synth = config.contains("synthetic");
  if (has_path == has_synth)
    throw ConfigError("config needs exactly one of dataset.path or synthetic");
  if (has_path) {
    const json& d = config["dataset"];
    const std::string path = d["path"].get<std::string>();
    if (!fs::exists(path)) throw ConfigError("dataset.path does not exist: " + path);
    const DatasetSchema schema =
        d.contains("schema") ? parse_schema(d["schema"]) : DatasetSchema{};
    LoadReport report;
    RctDataset ds = load_dataset(path, schema, &report);
    if (report.rows_with_missing_values > 0)
      std::cerr << "note: " << report.rows_with_missing_values
                << " rows with missing values were excluded\n";
    return ds;
  }
  const SyntheticSpec spec = parse_synthetic(config["synthetic"]);
  if (spec.kind == "featureless") {
    const SyntheticGroundTruth gt =
        generate_ground_truth(spec.n, spec.num_treatments, seed);
    return sample_rct(gt, RngStream::derive(seed, "rct").next_u64());
  }
  return generate_featured(spec.n, spec.num_treatments, spec.feature_dim, seed)
      .first;
}

json metric_config(const json& config, const std::string& kind) {
  if (!config.contains("metrics")) return json();
  for (const json& m : config["metrics"])
    if (m.value("kind", "") == kind) return m;
  return json();
}

// --- Commands -------------------------------------------------------------

int cmd_gen_synthetic(const CommonOptions& options) {
  const Experiment exp = prepare(options);
  if (!exp.config.contains("synthetic"))
    throw ConfigError("gen-synthetic requires a 'synthetic' section");
  const SyntheticSpec spec = parse_synthetic(exp.config["synthetic"]);

  fs::create_directories(exp.out_dir);
  RctDataset dataset;
  SyntheticGroundTruth gt;
  if (spec.kind == "featureless") {
    gt = generate_ground_truth(spec.n, spec.num_treatments, exp.seed);
    dataset = sample_rct(gt, RngStream::derive(exp.seed, "rct").next_u64());
  } else {
    std::tie(dataset, gt) = generate_featured(spec.n, spec.num_treatments,
                                              spec.feature_dim, exp.seed);
  }
  atomic_write_file(exp.out_dir / "dataset.csv", [&](const std::string& p) {
    save_dataset(dataset, p);
  });
  atomic_write_file(exp.out_dir / "ground_truth.csv", [&](const std::string& p) {
    save_ground_truth(gt, p);
  });
  std::cout << "wrote " << (exp.out_dir / "dataset.csv").string() << " ("
            << dataset.size() << " rows, K=" << dataset.num_treatments
            << ", d=" << dataset.feature_dim() << ") and ground_truth.csv\n";
  return kExitOk;
}

/// Shared by train and eval so both sides see the same partition and the
/// same train-fitted feature transform.
struct PreparedData {
  RctDataset train;
  RctDataset test;
  std::optional<FeatureTransform> transform;
};

PreparedData prepare_data(const json& config, std::uint64_t seed) {
  PreparedData out;
  RctDataset full = resolve_dataset(config, seed);
  double fraction = 1.0;
  if (config.contains("split"))
    fraction = config["split"].value("train_fraction", 1.0);
  if (fraction < 1.0) {
    auto [train_part, test_part] =
        split(full, fraction, RngStream::derive(seed, "train_test").next_u64());
    out.train = std::move(train_part);
    out.test = std::move(test_part);
  } else {
    out.train = std::move(full);
  }
  const bool standardize =
      config.value("standardize", out.train.feature_dim() > 0);
  if (standardize && out.train.feature_dim() > 0) {
    auto [transform, transformed] = standardize_features(out.train);
    out.train = std::move(transformed);
    out.transform = transform;
    if (out.test.size() > 0) out.test = transform.apply(out.test);
  }
  return out;
}

int cmd_train(const CommonOptions& options) {
  const Experiment exp = prepare(options);
  const TrainConfig tc = parse_train(exp.config, exp.seed, exp.threads);
  const PreparedData data = prepare_data(exp.config, exp.seed);
  const ModelConfig mc =
      parse_model(exp.config, data.train.feature_dim(), data.train.num_treatments);

  fs::create_directories(exp.out_dir);
  const fs::path checkpoint_path = exp.out_dir / "checkpoint.json";
  const EpochCallback per_epoch = [&](const TrainResult& state, int epoch) {
    Checkpoint ck{state.params, state.adam, exp.seed,
                  static_cast<long>(state.log.size()), epoch + 1};
    atomic_write_file(checkpoint_path, [&](const std::string& p) {
      save_checkpoint(ck, p);
    });
  };
  const TrainResult result = train(data.train, mc, tc, per_epoch);

  atomic_write_file(exp.out_dir / "train_log.jsonl", [&](const std::string& p) {
    save_train_log(result.log, p);
  });
  std::size_t q_calls = 0;
  for (const StepRecord& r : result.log) q_calls += r.evaluations_used;
  const json report{{"config_hash", hash_string(config_hash(exp.config))},
                    {"steps", result.log.size()},
                    {"final_sl_loss", result.log.back().sl_loss},
                    {"q_evaluations", q_calls},
                    {"train_rows", data.train.size()},
                    {"test_rows", data.test.size()}};
  atomic_write_text(exp.out_dir / "train_report.json", report.dump(2) + "\n");
  std::cout << "trained " << result.log.size() << " steps; checkpoint at "
            << checkpoint_path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonOptions& options, const std::string& checkpoint_arg) {
  const Experiment exp = prepare(options);
  const PreparedData data = prepare_data(exp.config, exp.seed);
  const RctDataset& eval_set = data.test.size() > 0 ? data.test : data.train;

  // Predictions come from a checkpoint, or from the ground-truth sidecar
  // when the config asks for the "perfect model" route.
  PredictionPair pred;
  std::string source;
  const bool use_ground_truth = exp.config.contains("dataset") &&
                                exp.config["dataset"].contains("ground_truth");
  if (use_ground_truth) {
    const std::string gt_path =
        exp.config["dataset"]["ground_truth"].get<std::string>();
    if (!fs::exists(gt_path))
      throw ConfigError("dataset.ground_truth does not exist: " + gt_path);
    const SyntheticGroundTruth gt = load_ground_truth(gt_path);
    if (gt.size() != eval_set.size())
      throw ConfigError("ground truth rows do not match the evaluation split");
    pred.v = gt.v;
    pred.c = gt.c;
    source = "ground_truth";
  } else {
    if (checkpoint_arg.empty())
      throw ConfigError("eval needs a checkpoint (or dataset.ground_truth)");
    if (!fs::exists(checkpoint_arg))
      throw ConfigError("checkpoint does not exist: " + checkpoint_arg);
    const Checkpoint ck = load_checkpoint(checkpoint_arg);
    pred = forward(ck.params, eval_set.features);
    source = checkpoint_arg;
  }

  fs::create_directories(exp.out_dir);
  json metrics = json::array();
  const RctBatch batch = full_batch(eval_set);

  const json eom_request = metric_config(exp.config, "eom_at_budget");
  if (!eom_request.is_null()) {
    const double budget = eom_request.value("per_capita_budget", 2.0);
    QEvalParams qp = parse_q_eval(exp.config);
    const EomAtBudget eom = eom_at_budget(pred, batch, budget, qp);
    metrics.push_back({{"name", "eom_response"},
                       {"value", eom.response},
                       {"per_capita_budget", budget},
                       {"per_capita_cost", eom.cost},
                       {"alpha", eom.alpha},
                       {"converged", eom.converged}});
  }

  const json aucc_request = metric_config(exp.config, "aucc");
  if (!aucc_request.is_null()) {
    const std::vector<double> scores = uplift_ratio_scores(pred);
    const CostCurve curve = build_cost_curve(scores, eval_set);
    atomic_write_file(exp.out_dir / "cost_curve.csv", [&](const std::string& p) {
      save_cost_curve(curve, p);
    });
    metrics.push_back({{"name", "aucc"}, {"value", aucc(curve)}});
  }

  const json curve_request = metric_config(exp.config, "cost_value_curve");
  if (!curve_request.is_null()) {
    const json grid = curve_request.value("alpha_grid", json());
    const double lo = grid.is_null() ? 0.0 : grid.value("min", 0.0);
    const double hi = grid.is_null() ? 0.5 : grid.value("max", 0.5);
    const int count = grid.is_null() ? 101 : grid.value("count", 101);
    std::vector<double> alphas;
    for (int g = 0; g < count; ++g)
      alphas.push_back(lo + (hi - lo) * g / std::max(1, count - 1));
    const auto curve = cost_value_curve(pred, batch, alphas);
    atomic_write_file(exp.out_dir / "alpha_curve.csv", [&](const std::string& p) {
      save_curve(curve, p);
    });
  }

  const json report{{"config_hash", hash_string(config_hash(exp.config))},
                    {"prediction_source", source},
                    {"eval_rows", eval_set.size()},
                    {"metrics", metrics}};
  atomic_write_text(exp.out_dir / "metrics.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_ascent_demo(const CommonOptions& options) {
  const Experiment exp = prepare(options);
  if (!exp.config.contains("ascent"))
    throw ConfigError("ascent-demo requires an 'ascent' section");
  const json& a = exp.config["ascent"];
  const int steps = a.value("steps", 100);
  const double lr = a.value("learning_rate", 0.005);
  const double budget = a.value("per_capita_budget", 2.0);

  const SyntheticSpec spec = parse_synthetic(
      exp.config.contains("synthetic") ? exp.config["synthetic"]
                                       : json{{"n", 10000}});
  if (spec.kind != "featureless")
    throw ConfigError("the ascent demo runs on featureless synthetic data");

  const SyntheticGroundTruth gt =
      generate_ground_truth(spec.n, spec.num_treatments, exp.seed);
  const RctDataset ds =
      sample_rct(gt, RngStream::derive(exp.seed, "rct").next_u64());
  const RctBatch batch = full_batch(ds);
  // Fresh response matrix from the same construction, independent of the
  // ground truth that generated the outcomes.
  const SyntheticGroundTruth start = generate_ground_truth(
      spec.n, spec.num_treatments,
      RngStream::derive(exp.seed, "ascent_v0").next_u64());

  QEvalParams qp = parse_q_eval(exp.config);
  qp.total_budget = budget * static_cast<double>(batch.size());
  NesParams nes = parse_nes(a);
  nes.seed = RngStream::derive(exp.seed, "ascent").next_u64();

  const AscentResult result = gradient_ascent_on_matrix(
      start.v, gt.c, batch, qp, nes, steps, lr, exp.threads);

  fs::create_directories(exp.out_dir);
  std::string trace = "step,q,alpha\n";
  for (std::size_t s = 0; s < result.q_trace.size(); ++s) {
    char line[96];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", s, result.q_trace[s],
                  result.alpha_trace[s]);
    trace += line;
  }
  atomic_write_text(exp.out_dir / "q_trace.csv", trace);

  const json grid = a.value("curve_grid", json());
  const double lo = grid.is_null() ? 0.0 : grid.value("min", 0.0);
  const double hi = grid.is_null() ? 0.5 : grid.value("max", 0.5);
  const int count = grid.is_null() ? 101 : grid.value("count", 101);
  std::vector<double> alphas;
  for (int g = 0; g < count; ++g)
    alphas.push_back(lo + (hi - lo) * g / std::max(1, count - 1));
  atomic_write_file(exp.out_dir / "initial_curve.csv", [&](const std::string& p) {
    save_curve(cost_value_curve({start.v, gt.c}, batch, alphas), p);
  });
  atomic_write_file(exp.out_dir / "final_curve.csv", [&](const std::string& p) {
    save_curve(cost_value_curve({result.v_final, gt.c}, batch, alphas), p);
  });

  std::cout << "Q: " << result.q_trace.front() << " -> " << result.q_trace.back()
            << " over " << steps << " steps\n";
  return kExitOk;
}

int cmd_grad_check(const CommonOptions& options) {
  const Experiment exp = prepare(options);
  const json g = exp.config.contains("grad_check") ? exp.config["grad_check"]
                                                   : json::object();
  const std::size_t n = g.value("n", static_cast<std::size_t>(100));
  const int k = g.value("num_treatments", 4);
  const double budget = g.value("per_capita_budget", 2.0);
  const double reference_h = g.value("reference_h", 6e-3);
  const double sigma = g.value("sigma", 1e-3);
  const int runs = g.value("runs", 5);
  std::vector<std::size_t> sweep{100, 500, 2000};
  if (g.contains("nes_sweep"))
    sweep = g["nes_sweep"].get<std::vector<std::size_t>>();

  const SyntheticGroundTruth gt = generate_ground_truth(n, k, exp.seed);
  const RctDataset ds =
      sample_rct(gt, RngStream::derive(exp.seed, "rct").next_u64());
  const RctBatch batch = full_batch(ds);
  const SyntheticGroundTruth start = generate_ground_truth(
      n, k, RngStream::derive(exp.seed, "grad_check_v0").next_u64());
  const PredictionPair pred{start.v, gt.c};

  QEvalParams qp = parse_q_eval(exp.config);
  qp.total_budget = budget * static_cast<double>(n);
  // A tight tolerance keeps the reference sensitive to the allocation
  // structure instead of the early-break grid.
  if (!exp.config.contains("q_eval") ||
      !exp.config["q_eval"].contains("tolerance"))
    qp.tolerance = 1e-9;
  const QFunction q = make_q_function(batch, qp);

  FdParams fd;
  fd.h = reference_h;
  fd.num_entries = n * static_cast<std::size_t>(k);  // every coordinate
  fd.seed = RngStream::derive(exp.seed, "grad_check_fd").next_u64();
  const GradEstimate reference =
      estimate_grad_fd(q, pred, fd, Wrt::kResponse, exp.threads);
  if (reference.grad_v.isZero(0.0))
    throw Error(
        "the finite-difference reference is identically zero; raise "
        "grad_check.reference_h or use a larger instance");

  json sweeps = json::array();
  for (std::size_t nprime : sweep) {
    std::vector<double> sims;
    std::size_t evals = 0;
    for (int run = 0; run < runs; ++run) {
      NesParams nes;
      nes.sigma = sigma;
      nes.num_directions = nprime;
      nes.seed = RngStream::derive(exp.seed, "grad_check_nes",
                                   nprime * 1000 + static_cast<std::size_t>(run))
                     .next_u64();
      const GradEstimate est =
          estimate_grad_nes(q, pred, nes, Wrt::kResponse, exp.threads);
      sims.push_back(cosine_similarity(est.grad_v, reference.grad_v));
      evals = est.evaluations_used;
    }
    std::vector<double> sorted = sims;
    std::sort(sorted.begin(), sorted.end());
    sweeps.push_back({{"num_directions", nprime},
                      {"cosine_similarities", sims},
                      {"median_cosine", sorted[sorted.size() / 2]},
                      {"evaluations_used_per_run", evals}});
  }

  fs::create_directories(exp.out_dir);
  const json report{{"config_hash", hash_string(config_hash(exp.config))},
                    {"instance", {{"n", n}, {"num_treatments", k}}},
                    {"reference",
                     {{"h", reference_h},
                      {"entries", fd.num_entries},
                      {"evaluations_used", reference.evaluations_used}}},
                    {"nes", std::move(sweeps)}};
  atomic_write_text(exp.out_dir / "grad_check.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained treatment allocation toolkit"};
  app.require_subcommand(1);

  CommonOptions options;
  std::string checkpoint_arg;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", options.config_path, "Experiment config (JSON)")
        ->required();
    cmd->add_option("--seed", options.seed_override, "Override the config seed");
    cmd->add_option("--out", options.out_override, "Override the output directory");
    cmd->add_flag("--strict-determinism", options.strict_determinism,
                  "Force single-threaded evaluation");
  };

  CLI::App* gen =
      app.add_subcommand("gen-synthetic", "Generate a synthetic RCT dataset");
  add_common(gen);
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd);
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint_arg, "Checkpoint to evaluate");
  CLI::App* ascent = app.add_subcommand(
      "ascent-demo", "Gradient ascent directly on a response matrix");
  add_common(ascent);
  CLI::App* grad = app.add_subcommand(
      "grad-check",
      "Compare NES estimates against the full finite-difference gradient");
  add_common(grad);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_synthetic(options);
    if (train_cmd->parsed()) return cmd_train(options);
    if (eval_cmd->parsed()) return cmd_eval(options, checkpoint_arg);
    if (ascent->parsed()) return cmd_ascent_demo(options);
    if (grad->parsed()) return cmd_grad_check(options);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
