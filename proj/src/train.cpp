#include "agnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "agnn/error.hpp"
#include "agnn/rng.hpp"

namespace agnn {

Split make_split(const LabelSet& labels, int per_class, int val_size, std::uint64_t seed) {
  if (labels.indices.empty()) {
    throw ContractError("make_split: empty label set");
  }
  if (per_class <= 0 || val_size < 0) {
    throw ConfigError("make_split: per_class must be positive and val_size >= 0");
  }

  std::map<Index, std::vector<Index>> by_class;
  for (std::size_t k = 0; k < labels.indices.size(); ++k) {
    by_class[labels.labels[k]].push_back(labels.indices[k]);
  }

  Split split;
  Rng rng(seed);
  std::vector<Index> remainder;
  for (auto& [cls, members] : by_class) {
    rng.shuffle(members);
    std::size_t take = static_cast<std::size_t>(per_class);
    if (members.size() < take) {
      take = (members.size() + 1) / 2;
      split.warnings.push_back("class " + std::to_string(cls) + " has only " +
                               std::to_string(members.size()) + " members; using " +
                               std::to_string(take) + " for training");
    }
    split.train.insert(split.train.end(), members.begin(), members.begin() + take);
    remainder.insert(remainder.end(), members.begin() + take, members.end());
  }

  rng.shuffle(remainder);
  std::size_t val_take = static_cast<std::size_t>(val_size);
  if (remainder.size() < val_take) {
    val_take = remainder.size();
    split.warnings.push_back("validation capped at " + std::to_string(val_take) +
                             " of requested " + std::to_string(val_size));
  }
  split.val.assign(remainder.begin(), remainder.begin() + val_take);
  split.test.assign(remainder.begin() + val_take, remainder.end());

  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

AdamState::AdamState(const std::vector<Matrixd*>& params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Matrixd* p : params) {
    m.push_back(Matrixd::Zero(p->rows(), p->cols()));
    v.push_back(Matrixd::Zero(p->rows(), p->cols()));
  }
}

void adam_step(AdamState& state, const std::vector<Matrixd*>& weights,
               const std::vector<const Matrixd*>& grads, double lr, double weight_decay) {
  if (weights.size() != grads.size() || weights.size() != state.m.size()) {
    throw ContractError("adam_step: parameter/gradient count mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Matrixd& w = *weights[i];
    const Matrixd g = *grads[i] + weight_decay * w;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
    const Matrixd m_hat = state.m[i] / bc1;
    const Matrixd v_hat = state.v[i] / bc2;
    w.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + state.epsilon);
  }
}

namespace {

LabelSet subset_labels(const LabelSet& labels, std::span<const Index> nodes) {
  // Map node id -> label once; subsets are tiny compared to the label set.
  std::map<Index, Index> lookup;
  for (std::size_t k = 0; k < labels.indices.size(); ++k) {
    lookup[labels.indices[k]] = labels.labels[k];
  }
  LabelSet out;
  out.num_classes = labels.num_classes;
  for (Index v : nodes) {
    const auto it = lookup.find(v);
    if (it == lookup.end()) {
      throw ContractError("node " + std::to_string(v) + " has no label");
    }
    out.indices.push_back(v);
    out.labels.push_back(it->second);
  }
  return out;
}

Index argmax_row(const Matrixd& m, Index row) {
  Index best = 0;
  for (Index j = 1; j < m.cols(); ++j) {
    if (m(row, j) > m(row, best)) best = j;  // strict: ties keep lowest index
  }
  return best;
}

double accuracy_from_probabilities(const Matrixd& probs, const LabelSet& labeled) {
  Index hits = 0;
  for (std::size_t k = 0; k < labeled.indices.size(); ++k) {
    if (argmax_row(probs, labeled.indices[k]) == labeled.labels[k]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labeled.indices.size());
}

std::vector<Matrixd> snapshot(const std::vector<Matrixd*>& params) {
  std::vector<Matrixd> out;
  out.reserve(params.size());
  for (const Matrixd* p : params) out.push_back(*p);
  return out;
}

void restore(const std::vector<Matrixd*>& params, const std::vector<Matrixd>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = snap[i];
}

}  // namespace

FitResult fit(AgnnModel& model, const DirectedGraph& graph, const PropagationOperators& ops,
              const Matrixd& features, const LabelSet& labels, const Split& split,
              const TrainConfig& config) {
  if (split.train.empty() || split.val.empty()) {
    throw ContractError("fit: train and validation sets must be non-empty");
  }
  if (config.patience < 0 || config.patience > config.max_epochs) {
    throw ConfigError("fit: patience must be in [0, max_epochs]");
  }
  const LabelSet train_labels = subset_labels(labels, split.train);
  const LabelSet val_labels = subset_labels(labels, split.val);
  const bool use_reg = config.lambda > 0.0 && !config.ablate_regularizer;

  auto params = model.parameters();
  AdamState adam(params);

  FitResult result;
  std::vector<Matrixd> best = snapshot(params);
  double best_val_acc = -1.0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since_improvement = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Tape tape;
    ForwardVars fv = forward(tape, model, ops, features, /*training=*/true,
                             mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    const Var logits = fuse(tape, model, fv);
    const Var err = cross_entropy(tape, logits, train_labels);

    Var objective = err;
    double reg_value = 0.0;
    if (use_reg) {
      const Var reg =
          config.sampled_regularizer
              ? regularization_loss_sampled(
                    tape, fv.s_final, fv.r_final, graph.adjacency,
                    config.negative_samples,
                    mix_seed(config.seed, static_cast<std::uint64_t>(epoch), 7))
              : regularization_loss(tape, fv.s_final, fv.r_final, graph.adjacency);
      reg_value = tape.value(reg)(0, 0);
      objective = total_loss(tape, err, reg, config.lambda);
    }

    const double err_value = tape.value(err)(0, 0);
    const double total_value = tape.value(objective)(0, 0);
    if (!std::isfinite(total_value)) {
      throw NumericError("fit: loss diverged at epoch " + std::to_string(epoch));
    }

    tape.backward(objective);
    std::vector<const Matrixd*> grads;
    grads.reserve(params.size());
    for (std::size_t i = 0; i < fv.params.size(); ++i) {
      grads.push_back(&tape.grad(fv.params[i]));
    }
    adam_step(adam, params, grads, config.lr, config.weight_decay);

    // Evaluation-mode pass for validation metrics.
    const Matrixd probs = predict_probabilities(model, ops, features);
    const double val_acc = accuracy_from_probabilities(probs, val_labels);
    const double val_loss = cross_entropy_value(probs, val_labels);

    result.history.push_back({epoch, err_value, reg_value, total_value, val_acc});

    // The snapshot updates on accuracy improvement, with validation loss as
    // the tie-break; the patience clock only resets when accuracy increases.
    const bool acc_increased = val_acc > best_val_acc;
    if (acc_increased || (val_acc == best_val_acc && val_loss < best_val_loss)) {
      best_val_acc = val_acc;
      best_val_loss = val_loss;
      best = snapshot(params);
      best_epoch = epoch;
    }
    since_improvement = acc_increased ? 0 : since_improvement + 1;
    if (config.patience > 0 && since_improvement >= config.patience) {
      break;
    }
  }

  restore(params, best);
  result.best_val_accuracy = best_val_acc;
  result.best_epoch = best_epoch;
  return result;
}

double evaluate_classification(const AgnnModel& model, const PropagationOperators& ops,
                               const Matrixd& features, const LabelSet& labels,
                               std::span<const Index> nodes) {
  if (nodes.empty()) {
    throw ContractError("evaluate_classification: empty node set");
  }
  const LabelSet subset = subset_labels(labels, nodes);
  const Matrixd probs = predict_probabilities(model, ops, features);
  return accuracy_from_probabilities(probs, subset);
}

RegressionMetrics evaluate_regression(std::span<const double> predictions,
                                      std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw DimensionError("evaluate_regression: length mismatch");
  }
  if (predictions.empty()) {
    throw ContractError("evaluate_regression: empty sample set");
  }
  RegressionMetrics out;
  double sq = 0.0, abs_sum = 0.0, ape = 0.0;
  Index mape_count = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sq += d * d;
    abs_sum += std::abs(d);
    if (targets[i] != 0.0) {
      ape += std::abs(d / targets[i]);
      ++mape_count;
    } else {
      ++out.mape_excluded;
    }
  }
  const double n = static_cast<double>(predictions.size());
  out.rmse = std::sqrt(sq / n);
  out.mae = abs_sum / n;
  out.mape = mape_count > 0 ? ape / static_cast<double>(mape_count) : 0.0;
  return out;
}

RepeatedResult aggregate(const std::vector<double>& values) {
  RepeatedResult out;
  out.per_repeat = values;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

double run_single(const DirectedGraph& graph, const PropagationOperators& ops,
                  const Matrixd& features, const LabelSet& labels,
                  const TrainConfig& config, FitResult* fit_out, Split* split_out,
                  AgnnModel* model_out) {
  const Split split =
      make_split(labels, config.per_class, config.val_size, mix_seed(config.seed, 1));
  if (split.test.empty()) {
    throw ContractError("run_single: split produced an empty test set");
  }

  ModelConfig mc;
  mc.widths.push_back(features.cols());
  for (Index l = 0; l + 1 < config.num_layers; ++l) mc.widths.push_back(config.hidden);
  mc.widths.push_back(labels.num_classes);
  mc.fusion = config.fusion;
  mc.mode = config.mode;
  mc.task = Task::NodeClassification;
  mc.dropout = config.dropout;
  AgnnModel model = init_weights(mc, mix_seed(config.seed, 2));

  FitResult fr = fit(model, graph, ops, features, labels, split, config);
  const double acc = evaluate_classification(model, ops, features, labels, split.test);
  if (fit_out) *fit_out = std::move(fr);
  if (split_out) *split_out = split;
  if (model_out) *model_out = std::move(model);
  return acc;
}

RepeatedResult run_repeated(const DirectedGraph& graph, const Matrixd& features,
                            const LabelSet& labels, const TrainConfig& config,
                            int repeats, std::vector<FitResult>* histories,
                            AgnnModel* first_model) {
  if (repeats < 1) {
    throw ConfigError("run_repeated: repeats must be >= 1");
  }
  const PropagationOperators ops = build_operators(graph);
  std::vector<double> accs;
  accs.reserve(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    TrainConfig cfg = config;
    cfg.seed = mix_seed(config.seed, static_cast<std::uint64_t>(r) + 100);
    FitResult fr;
    accs.push_back(run_single(graph, ops, features, labels, cfg, &fr, nullptr,
                              r == 0 ? first_model : nullptr));
    if (histories) histories->push_back(std::move(fr));
  }
  return aggregate(accs);
}

std::vector<RegressionEpochRecord> fit_regression(AgnnModel& model,
                                                  const std::vector<GraphSample>& samples,
                                                  std::span<const Index> train_idx,
                                                  const TrainConfig& config) {
  if (train_idx.empty()) {
    throw ContractError("fit_regression: empty training set");
  }
  auto params = model.parameters();
  AdamState adam(params);
  std::vector<RegressionEpochRecord> history;

  std::vector<Matrixd> grad_accum;
  for (const Matrixd* p : params) grad_accum.push_back(Matrixd::Zero(p->rows(), p->cols()));

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (Matrixd& g : grad_accum) g.setZero();
    double mse = 0.0;
    for (std::size_t t = 0; t < train_idx.size(); ++t) {
      const GraphSample& gs = samples[static_cast<std::size_t>(train_idx[t])];
      Tape tape;
      ForwardVars fv =
          forward(tape, model, gs.ops, gs.features, /*training=*/true,
                  mix_seed(config.seed, static_cast<std::uint64_t>(epoch), t));
      const Var pred = graph_head(tape, model, fv);
      const Var loss = regression_loss(tape, pred, Matrixd::Constant(1, 1, gs.target));
      mse += tape.value(loss)(0, 0);
      tape.backward(loss);
      for (std::size_t i = 0; i < params.size(); ++i) {
        grad_accum[i] += tape.grad(fv.params[i]);
      }
    }
    const double inv = 1.0 / static_cast<double>(train_idx.size());
    mse *= inv;
    if (!std::isfinite(mse)) {
      throw NumericError("fit_regression: loss diverged at epoch " + std::to_string(epoch));
    }
    for (Matrixd& g : grad_accum) g *= inv;
    std::vector<const Matrixd*> grads;
    for (const Matrixd& g : grad_accum) grads.push_back(&g);
    adam_step(adam, params, grads, config.lr, config.weight_decay);
    history.push_back({epoch, mse});
  }
  return history;
}

}  // namespace agnn
