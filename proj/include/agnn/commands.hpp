#pragma once

#include <string>
#include <vector>

#include "agnn/data.hpp"
#include "agnn/train.hpp"

namespace agnn {

/// Everything a CLI invocation needs. Populated from flags and/or a config
/// file; flags win. Exactly one dataset source per command.
struct ExperimentConfig {
  std::string edges_path;
  std::string features_path;  // empty -> one-hot
  std::string labels_path;
  std::string manifest_path;  // graph-regression sets
  std::string checkpoint_path;

  TrainConfig train;
  bool symmetrize_graph = false;

  std::vector<double> lambda_sweep;
  std::vector<std::string> fusion_sweep;
  int repeats = 1;

  std::string out_dir = ".";
  std::string run_name = "run";
  bool quiet = false;  // suppresses the one-line stdout summary

  // gen-sbm
  std::vector<Index> sbm_blocks;
  std::vector<double> sbm_pi;  // row-major blocks x blocks

  // gen-dag
  DagSpec dag;
};

// Each command returns a process exit code: 0 iff every output file was
// completely written.
int cmd_train(const ExperimentConfig& config);
int cmd_sweep_lambda(const ExperimentConfig& config);
int cmd_sweep_fusion(const ExperimentConfig& config);
int cmd_regression(const ExperimentConfig& config);
int cmd_gen_sbm(const ExperimentConfig& config);
int cmd_gen_dag(const ExperimentConfig& config);
int cmd_eval(const ExperimentConfig& config);

// Paths the commands write, for callers that consume the artifacts.
std::string report_path(const ExperimentConfig& config);
std::string history_path(const ExperimentConfig& config);
std::string lambda_csv_path(const ExperimentConfig& config);
std::string fusion_csv_path(const ExperimentConfig& config);
std::string checkpoint_out_path(const ExperimentConfig& config);

}  // namespace agnn
