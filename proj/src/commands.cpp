#include "agnn/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>

#include "agnn/error.hpp"
#include "agnn/report.hpp"
#include "agnn/rng.hpp"

namespace fs = std::filesystem;

namespace agnn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

DatasetBundle load_node_dataset(const ExperimentConfig& config) {
  if (config.edges_path.empty() || config.labels_path.empty()) {
    throw ConfigError("this command needs --edges and --labels");
  }
  if (!config.manifest_path.empty()) {
    throw ConfigError("--manifest is for the regress command; pass --edges/--labels");
  }
  std::optional<std::string> feats;
  if (!config.features_path.empty()) feats = config.features_path;
  DatasetBundle bundle = load_edge_list_dataset(config.edges_path, feats,
                                                config.labels_path);
  if (config.symmetrize_graph) {
    bundle.graph = symmetrize(bundle.graph);
  }
  return bundle;
}

void echo_config(RunReport& report, const ExperimentConfig& config,
                 const DatasetBundle* bundle) {
  report.add("seed", static_cast<long long>(config.train.seed));
  if (bundle) {
    report.add("dataset", bundle->name);
    report.add("nodes", static_cast<long long>(bundle->graph.n));
    report.add("edges", static_cast<long long>(bundle->graph.edges.size()));
    report.add("classes", static_cast<long long>(bundle->labels.num_classes));
  }
  report.add("config.lr", config.train.lr);
  report.add("config.weight_decay", config.train.weight_decay);
  report.add("config.dropout", config.train.dropout);
  report.add("config.hidden", static_cast<long long>(config.train.hidden));
  report.add("config.layers", static_cast<long long>(config.train.num_layers));
  report.add("config.max_epochs", static_cast<long long>(config.train.max_epochs));
  report.add("config.patience", static_cast<long long>(config.train.patience));
  report.add("config.lambda", config.train.lambda);
  report.add("config.fusion", to_string(config.train.fusion));
  report.add("config.mode", to_string(config.train.mode));
  report.add("config.per_class", static_cast<long long>(config.train.per_class));
  report.add("config.val_size", static_cast<long long>(config.train.val_size));
  report.add("config.symmetrize", config.symmetrize_graph ? "true" : "false");
  report.add("config.ablate_regularizer",
             config.train.ablate_regularizer ? "true" : "false");
  report.add("config.repeats", static_cast<long long>(config.repeats));
}

bool write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(history.size());
  for (const EpochRecord& e : history) {
    rows.push_back({std::to_string(e.epoch), format_double(e.loss_error),
                    format_double(e.loss_reg), format_double(e.loss_total),
                    format_double(e.val_accuracy)});
  }
  return write_csv(path, {"epoch", "loss_error", "loss_reg", "loss_total", "val_accuracy"},
                   rows);
}

std::string join(const fs::path& dir, const std::string& name) {
  return (dir / name).string();
}

}  // namespace

std::string report_path(const ExperimentConfig& c) {
  return join(c.out_dir, c.run_name + "_report.txt");
}
std::string history_path(const ExperimentConfig& c) {
  return join(c.out_dir, c.run_name + "_history.csv");
}
std::string lambda_csv_path(const ExperimentConfig& c) {
  return join(c.out_dir, c.run_name + "_lambda_sweep.csv");
}
std::string fusion_csv_path(const ExperimentConfig& c) {
  return join(c.out_dir, c.run_name + "_fusion_sweep.csv");
}
std::string checkpoint_out_path(const ExperimentConfig& c) {
  return join(c.out_dir, c.run_name + "_model.ckpt");
}

int cmd_train(const ExperimentConfig& config) {
  const auto start = Clock::now();
  const DatasetBundle bundle = load_node_dataset(config);
  fs::create_directories(config.out_dir);

  std::vector<FitResult> histories;
  AgnnModel first_model;
  const RepeatedResult result = run_repeated(bundle.graph, bundle.features, bundle.labels,
                                             config.train, config.repeats, &histories,
                                             &first_model);

  RunReport report;
  report.command = "train";
  echo_config(report, config, &bundle);
  for (std::size_t r = 0; r < result.per_repeat.size(); ++r) {
    report.add("repeat." + std::to_string(r) + ".accuracy", result.per_repeat[r]);
    report.add("repeat." + std::to_string(r) + ".best_epoch",
               static_cast<long long>(histories[r].best_epoch));
  }
  report.add("mean_accuracy", result.mean);
  report.add("std_accuracy", result.stddev);

  if (!write_history_csv(history_path(config), histories.front().history)) return 1;
  save_model(checkpoint_out_path(config), first_model);
  report.add("wall_clock_seconds", seconds_since(start));
  if (!write_report(report_path(config), report)) return 1;
  if (!config.quiet) {
    std::cout << "accuracy " << format_double(result.mean) << " +/- "
              << format_double(result.stddev) << "\n";
  }
  return 0;
}

int cmd_sweep_lambda(const ExperimentConfig& config) {
  if (config.lambda_sweep.empty()) {
    throw ConfigError("sweep-lambda: provide at least one --lambda value");
  }
  for (double l : config.lambda_sweep) {
    if (l < 0.0) throw ConfigError("sweep-lambda: lambda must be non-negative");
  }
  std::vector<double> lambdas = config.lambda_sweep;
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());

  const DatasetBundle bundle = load_node_dataset(config);
  fs::create_directories(config.out_dir);

  std::vector<std::vector<std::string>> rows;
  for (double lambda : lambdas) {
    TrainConfig cfg = config.train;
    cfg.lambda = lambda;
    const RepeatedResult r = run_repeated(bundle.graph, bundle.features, bundle.labels,
                                          cfg, config.repeats);
    rows.push_back({format_double(lambda), format_double(r.mean), format_double(r.stddev)});
  }
  if (!write_csv(lambda_csv_path(config), {"lambda", "mean_acc", "std_acc"}, rows)) {
    return 1;
  }
  return 0;
}

int cmd_sweep_fusion(const ExperimentConfig& config) {
  if (config.fusion_sweep.empty()) {
    throw ConfigError("sweep-fusion: provide at least one --fusion tag");
  }
  std::set<Fusion> seen;
  std::vector<Fusion> fusions;
  for (const std::string& tag : config.fusion_sweep) {
    const Fusion f = fusion_from_string(tag);  // unknown tag -> ConfigError
    if (seen.insert(f).second) fusions.push_back(f);
  }
  // Canonical row order regardless of how the tags were passed.
  std::sort(fusions.begin(), fusions.end());

  const DatasetBundle bundle = load_node_dataset(config);
  fs::create_directories(config.out_dir);

  std::vector<std::vector<std::string>> rows;
  for (Fusion f : fusions) {
    TrainConfig cfg = config.train;
    cfg.fusion = f;
    const RepeatedResult r = run_repeated(bundle.graph, bundle.features, bundle.labels,
                                          cfg, config.repeats);
    rows.push_back({to_string(f), format_double(r.mean), format_double(r.stddev)});
  }
  if (!write_csv(fusion_csv_path(config), {"fusion", "mean_acc", "std_acc"}, rows)) {
    return 1;
  }
  return 0;
}

int cmd_regression(const ExperimentConfig& config) {
  const auto start = Clock::now();
  if (config.manifest_path.empty()) {
    throw ConfigError("regress: provide --manifest (node-task flags are not accepted)");
  }
  if (!config.edges_path.empty() || !config.labels_path.empty()) {
    throw ConfigError("regress: --edges/--labels belong to node tasks; pass --manifest");
  }
  const std::vector<GraphSample> samples = load_graph_set(config.manifest_path);
  fs::create_directories(config.out_dir);

  // Deterministic 90/10 split.
  std::vector<Index> order(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) order[i] = static_cast<Index>(i);
  Rng rng(mix_seed(config.train.seed, 11));
  rng.shuffle(order);
  const std::size_t train_count =
      std::max<std::size_t>(1, (samples.size() * 9) / 10);
  std::vector<Index> train_idx(order.begin(), order.begin() + train_count);
  std::vector<Index> test_idx(order.begin() + train_count, order.end());
  if (test_idx.empty()) {
    throw ContractError("regress: need at least one held-out graph");
  }

  ModelConfig mc;
  mc.widths.push_back(samples.front().features.cols());
  for (Index l = 0; l < config.train.num_layers; ++l) mc.widths.push_back(config.train.hidden);
  mc.fusion = config.train.fusion;
  mc.mode = config.train.mode;
  mc.task = Task::GraphRegression;
  mc.dropout = config.train.dropout;
  AgnnModel model = init_weights(mc, mix_seed(config.train.seed, 2));

  fit_regression(model, samples, train_idx, config.train);

  std::vector<double> preds, targets;
  for (Index t : test_idx) {
    const GraphSample& gs = samples[static_cast<std::size_t>(t)];
    preds.push_back(predict_graph(model, gs.ops, gs.features));
    targets.push_back(gs.target);
  }
  const RegressionMetrics metrics = evaluate_regression(preds, targets);

  // Constant predictor fitted on the training targets, for context.
  double train_mean = 0.0;
  for (Index t : train_idx) train_mean += samples[static_cast<std::size_t>(t)].target;
  train_mean /= static_cast<double>(train_idx.size());
  double base_sq = 0.0;
  for (double t : targets) base_sq += (train_mean - t) * (train_mean - t);
  const double baseline_rmse = std::sqrt(base_sq / static_cast<double>(targets.size()));

  RunReport report;
  report.command = "regress";
  report.add("seed", static_cast<long long>(config.train.seed));
  report.add("manifest", config.manifest_path);
  report.add("graphs", static_cast<long long>(samples.size()));
  report.add("train_graphs", static_cast<long long>(train_idx.size()));
  report.add("test_graphs", static_cast<long long>(test_idx.size()));
  report.add("config.lr", config.train.lr);
  report.add("config.hidden", static_cast<long long>(config.train.hidden));
  report.add("config.layers", static_cast<long long>(config.train.num_layers));
  report.add("config.max_epochs", static_cast<long long>(config.train.max_epochs));
  report.add("config.dropout", config.train.dropout);
  report.add("rmse", metrics.rmse);
  report.add("mae", metrics.mae);
  report.add("mape", metrics.mape);
  report.add("mape_excluded", static_cast<long long>(metrics.mape_excluded));
  report.add("baseline_rmse_constant_mean", baseline_rmse);

  save_model(checkpoint_out_path(config), model);
  report.add("wall_clock_seconds", seconds_since(start));
  if (!write_report(report_path(config), report)) return 1;
  if (!config.quiet) {
    std::cout << "rmse " << format_double(metrics.rmse) << " mae "
              << format_double(metrics.mae) << " mape " << format_double(metrics.mape)
              << "\n";
  }
  return 0;
}

int cmd_gen_sbm(const ExperimentConfig& config) {
  if (config.sbm_blocks.empty()) {
    throw ConfigError("gen-sbm: provide --blocks");
  }
  const auto b = static_cast<Index>(config.sbm_blocks.size());
  if (config.sbm_pi.size() != static_cast<std::size_t>(b * b)) {
    throw ConfigError("gen-sbm: --pi needs blocks^2 row-major probabilities");
  }
  SbmSpec spec;
  spec.block_sizes = config.sbm_blocks;
  spec.pi.resize(b, b);
  for (Index i = 0; i < b; ++i) {
    for (Index j = 0; j < b; ++j) {
      spec.pi(i, j) = config.sbm_pi[static_cast<std::size_t>(i * b + j)];
    }
  }
  spec.seed = config.train.seed;
  const DatasetBundle bundle = generate_directed_sbm(spec);

  fs::create_directories(config.out_dir);
  write_edge_file(join(config.out_dir, config.run_name + ".edges"), bundle.graph);
  write_label_file(join(config.out_dir, config.run_name + ".labels"), bundle.labels);
  if (!config.quiet) {
    std::cout << "wrote " << bundle.graph.edges.size() << " edges over " << bundle.graph.n
              << " nodes\n";
  }
  return 0;
}

int cmd_gen_dag(const ExperimentConfig& config) {
  DagSpec spec = config.dag;
  spec.seed = config.train.seed;
  const std::vector<GraphSample> samples = generate_dag_regression(spec);
  const std::string manifest = write_graph_set(config.out_dir, config.run_name, samples);
  if (!config.quiet) {
    std::cout << "wrote " << samples.size() << " graphs, manifest " << manifest << "\n";
  }
  return 0;
}

int cmd_eval(const ExperimentConfig& config) {
  if (config.checkpoint_path.empty()) {
    throw ConfigError("eval: provide --checkpoint");
  }
  const AgnnModel model = load_model(config.checkpoint_path);
  if (model.task != Task::NodeClassification) {
    throw ConfigError("eval: checkpoint is not a node-classification model");
  }
  const DatasetBundle bundle = load_node_dataset(config);
  const PropagationOperators ops = build_operators(bundle.graph);
  const double acc = evaluate_classification(model, ops, bundle.features, bundle.labels,
                                             bundle.labels.indices);

  fs::create_directories(config.out_dir);
  RunReport report;
  report.command = "eval";
  report.add("checkpoint", config.checkpoint_path);
  report.add("dataset", bundle.name);
  report.add("labeled_nodes", static_cast<long long>(bundle.labels.indices.size()));
  report.add("accuracy", acc);
  if (!write_report(report_path(config), report)) return 1;
  if (!config.quiet) std::cout << "accuracy " << format_double(acc) << "\n";
  return 0;
}

}  // namespace agnn
