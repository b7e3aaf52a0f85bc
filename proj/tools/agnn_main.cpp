// Command-line front end: train / sweep-lambda / sweep-fusion / regress /
// gen-sbm / gen-dag / eval. Flags can also come from a config file via
// --config; explicit flags override file values.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agnn/commands.hpp"
#include "agnn/error.hpp"
#include "agnn/version.hpp"

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("AGNN_OUT");
  return env && *env ? env : ".";
}

// Merge a "key=value" config file into the argument list. File entries are
// appended only for options the user did not pass, so explicit flags always
// override the file, scalars and lists alike.
std::vector<std::string> merge_config_file(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) {
    throw agnn::InputError("cannot open config file '" + config_path + "'");
  }
  std::set<std::string> given;
  for (const std::string& a : args) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    const std::string flag = "--" + key;
    if (key.empty() || given.count(flag)) continue;
    if (eq == std::string::npos) {
      args.push_back(flag);
      continue;
    }
    std::istringstream values(line.substr(eq + 1));
    std::string tok;
    std::vector<std::string> toks;
    while (values >> tok) toks.push_back(tok);
    if (toks.empty()) {
      args.push_back(flag);
    } else {
      args.push_back(flag);
      for (const std::string& t : toks) args.push_back(t);
    }
  }
  return args;
}

void add_dataset_flags(CLI::App* cmd, agnn::ExperimentConfig& cfg) {
  cmd->add_option("--edges", cfg.edges_path, "edge list file (source<TAB>target)");
  cmd->add_option("--features", cfg.features_path, "feature file (id<TAB>v1,v2,...)");
  cmd->add_option("--labels", cfg.labels_path, "label file (id<TAB>class)");
  cmd->add_flag("--symmetrize", cfg.symmetrize_graph,
                "replace A with max(A, A^T) before training");
}

void add_train_flags(CLI::App* cmd, agnn::ExperimentConfig& cfg, std::string& mode) {
  cmd->add_option("--hidden", cfg.train.hidden, "hidden layer width");
  cmd->add_option("--layers", cfg.train.num_layers, "number of propagation layers");
  cmd->add_option("--lr", cfg.train.lr, "learning rate");
  cmd->add_option("--weight-decay", cfg.train.weight_decay, "weight decay");
  cmd->add_option("--dropout", cfg.train.dropout, "dropout rate");
  cmd->add_option("--epochs", cfg.train.max_epochs, "maximum training epochs");
  cmd->add_option("--patience", cfg.train.patience,
                  "early-stopping patience in epochs (0 disables)");
  cmd->add_option("--mode", mode, "mode: directed|undirected-tied");
  cmd->add_option("--per-class", cfg.train.per_class, "training labels per class");
  cmd->add_option("--val-size", cfg.train.val_size, "validation set size");
  cmd->add_option("--repeats", cfg.repeats, "number of repeated runs");
  cmd->add_flag("--ablate-reg", cfg.train.ablate_regularizer,
                "drop the regularizer term entirely");
  cmd->add_flag("--sampled-reg", cfg.train.sampled_regularizer,
                "use the negative-sampling regularizer estimate");
  cmd->add_option("--neg-samples", cfg.train.negative_samples,
                  "negatives per edge for --sampled-reg");
}

void add_common_flags(CLI::App* cmd, agnn::ExperimentConfig& cfg) {
  cmd->add_option("--seed", cfg.train.seed, "master random seed");
  cmd->add_option("--out", cfg.out_dir, "output directory (default $AGNN_OUT or .)");
  cmd->add_option("--name", cfg.run_name, "output file stem");
  // Handled by merge_config_file before parsing; declared for --help only.
  static std::string config_dummy;
  cmd->add_option("--config", config_dummy,
                  "key=value config file; explicit flags override it");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asymmetric dual-embedding GNN engine for directed graphs"};
  app.set_version_flag("--version", agnn::kEngineVersion);
  app.require_subcommand(1);

  agnn::ExperimentConfig cfg;
  cfg.out_dir = default_out_dir();
  std::string fusion = "sum";
  std::string mode = "directed";

  auto* train = app.add_subcommand("train", "train and report mean/std test accuracy");
  add_dataset_flags(train, cfg);
  add_train_flags(train, cfg, mode);
  train->add_option("--fusion", fusion, "fusion: sum|max|mean|concat");
  train->add_option("--lambda", cfg.train.lambda, "regularization coefficient");
  add_common_flags(train, cfg);

  auto* sweep_l = app.add_subcommand("sweep-lambda", "accuracy across lambda values");
  add_dataset_flags(sweep_l, cfg);
  add_train_flags(sweep_l, cfg, mode);
  sweep_l->add_option("--fusion", fusion, "fusion: sum|max|mean|concat");
  sweep_l->add_option("--lambda", cfg.lambda_sweep, "lambda values to sweep")
      ->expected(-1);
  add_common_flags(sweep_l, cfg);

  auto* sweep_f = app.add_subcommand("sweep-fusion", "accuracy across fusion functions");
  add_dataset_flags(sweep_f, cfg);
  add_train_flags(sweep_f, cfg, mode);
  sweep_f->add_option("--lambda", cfg.train.lambda, "regularization coefficient");
  sweep_f->add_option("--fusion", cfg.fusion_sweep, "fusion tags to sweep")->expected(-1);
  add_common_flags(sweep_f, cfg);

  auto* regress = app.add_subcommand("regress", "graph-level regression on a graph set");
  regress->add_option("--manifest", cfg.manifest_path, "graph-set manifest file");
  add_train_flags(regress, cfg, mode);
  regress->add_option("--fusion", fusion, "fusion: sum|max|mean|concat");
  regress->add_option("--lambda", cfg.train.lambda, "regularization coefficient");
  add_common_flags(regress, cfg);

  auto* gen_sbm = app.add_subcommand("gen-sbm", "generate a directed SBM dataset");
  gen_sbm->add_option("--blocks", cfg.sbm_blocks, "block sizes")->expected(-1);
  gen_sbm->add_option("--pi", cfg.sbm_pi, "row-major block probability matrix")
      ->expected(-1);
  add_common_flags(gen_sbm, cfg);

  auto* gen_dag = app.add_subcommand("gen-dag", "generate a DAG regression set");
  gen_dag->add_option("--count", cfg.dag.count, "number of graphs");
  gen_dag->add_option("--min-size", cfg.dag.min_size, "minimum node count");
  gen_dag->add_option("--max-size", cfg.dag.max_size, "maximum node count");
  gen_dag->add_option("--edge-prob", cfg.dag.edge_prob, "forward-edge probability");
  add_common_flags(gen_dag, cfg);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a labeled dataset");
  eval->add_option("--checkpoint", cfg.checkpoint_path, "model checkpoint file");
  add_dataset_flags(eval, cfg);
  add_common_flags(eval, cfg);

  std::vector<std::string> merged;
  try {
    merged = merge_config_file(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::vector<const char*> argv2;
  argv2.reserve(merged.size());
  for (const std::string& a : merged) argv2.push_back(a.c_str());
  CLI11_PARSE(app, static_cast<int>(argv2.size()), argv2.data());

  try {
    cfg.train.fusion = agnn::fusion_from_string(fusion);
    cfg.train.mode = agnn::mode_from_string(mode);
    if (train->parsed()) return agnn::cmd_train(cfg);
    if (sweep_l->parsed()) return agnn::cmd_sweep_lambda(cfg);
    if (sweep_f->parsed()) return agnn::cmd_sweep_fusion(cfg);
    if (regress->parsed()) return agnn::cmd_regression(cfg);
    if (gen_sbm->parsed()) return agnn::cmd_gen_sbm(cfg);
    if (gen_dag->parsed()) return agnn::cmd_gen_dag(cfg);
    if (eval->parsed()) return agnn::cmd_eval(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
