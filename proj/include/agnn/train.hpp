#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agnn/data.hpp"
#include "agnn/graph.hpp"
#include "agnn/loss.hpp"
#include "agnn/model.hpp"
#include "agnn/types.hpp"

namespace agnn {

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  Index hidden = 64;
  Index num_layers = 2;
  int max_epochs = 1000;
  int patience = 200;  // 0 disables early stopping
  double lambda = 0.0;
  std::uint64_t seed = 1;
  Fusion fusion = Fusion::Sum;
  Mode mode = Mode::Directed;
  int per_class = 20;
  int val_size = 500;
  bool ablate_regularizer = false;   // drop the reg term entirely
  bool sampled_regularizer = false;  // opt-in negative-sampling estimate
  int negative_samples = 5;
};

/// Disjoint train/validation/test node sets. make_split guarantees the
/// disjointness invariant; warnings record any per-class or validation-size
/// fallback that was applied.
struct Split {
  std::vector<Index> train, val, test;
  std::vector<std::string> warnings;
};

struct EpochRecord {
  int epoch = 0;
  double loss_error = 0.0;
  double loss_reg = 0.0;
  double loss_total = 0.0;
  double val_accuracy = 0.0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
};

/// 20-per-class style split: `per_class` training nodes drawn uniformly
/// without replacement from each class (falling back to half the class, with
/// a warning, when a class is too small), `val_size` validation nodes from
/// the remainder, and the rest as test. Deterministic in seed.
Split make_split(const LabelSet& labels, int per_class, int val_size, std::uint64_t seed);

/// Adam moments; beta1/beta2/epsilon fixed at the field-standard values.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Matrixd> m, v;

  explicit AdamState(const std::vector<Matrixd*>& params);
};

/// One coupled-weight-decay Adam update: g' = g + wd * w, then the standard
/// bias-corrected moment update and w <- w - lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(AdamState& state, const std::vector<Matrixd*>& weights,
               const std::vector<const Matrixd*>& grads, double lr, double weight_decay);

/// Full-batch training loop with validation-accuracy early stopping and
/// best-epoch weight restoration. The regularizer reads graph.adjacency (the
/// original A, no added self-loops). Aborts with NumericError on divergence.
FitResult fit(AgnnModel& model, const DirectedGraph& graph, const PropagationOperators& ops,
              const Matrixd& features, const LabelSet& labels, const Split& split,
              const TrainConfig& config);

/// Fraction of `nodes` whose argmax prediction matches the label (argmax
/// ties resolved to the lowest class index). Empty set -> ContractError.
double evaluate_classification(const AgnnModel& model, const PropagationOperators& ops,
                               const Matrixd& features, const LabelSet& labels,
                               std::span<const Index> nodes);

struct RegressionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double mape = 0.0;
  Index mape_excluded = 0;  // zero-target samples skipped by MAPE
};

RegressionMetrics evaluate_regression(std::span<const double> predictions,
                                      std::span<const double> targets);

struct RepeatedResult {
  std::vector<double> per_repeat;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single repeat
};

RepeatedResult aggregate(const std::vector<double>& values);

/// One self-contained classification run: split, init, fit, test accuracy.
double run_single(const DirectedGraph& graph, const PropagationOperators& ops,
                  const Matrixd& features, const LabelSet& labels,
                  const TrainConfig& config, FitResult* fit_out = nullptr,
                  Split* split_out = nullptr, AgnnModel* model_out = nullptr);

/// Repeat run_single with per-repeat seeds derived from config.seed (both the
/// split and the initialization vary per repeat); mean +/- sample std.
/// Optionally captures every repeat's history and the first repeat's model.
RepeatedResult run_repeated(const DirectedGraph& graph, const Matrixd& features,
                            const LabelSet& labels, const TrainConfig& config,
                            int repeats, std::vector<FitResult>* histories = nullptr,
                            AgnnModel* first_model = nullptr);

// ---------------------------------------------------------------------------
// Graph-level regression.
// ---------------------------------------------------------------------------

struct RegressionEpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
};

/// Full-batch gradient over all training graphs per epoch (mean of the
/// per-graph squared errors). No early stopping; runs exactly max_epochs.
std::vector<RegressionEpochRecord> fit_regression(AgnnModel& model,
                                                  const std::vector<GraphSample>& samples,
                                                  std::span<const Index> train_idx,
                                                  const TrainConfig& config);

}  // namespace agnn
