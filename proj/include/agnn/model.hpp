#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agnn/autodiff.hpp"
#include "agnn/graph.hpp"
#include "agnn/types.hpp"

namespace agnn {

enum class Fusion { Sum, Max, Mean, Concat };
enum class Mode { Directed, UndirectedTied };
enum class Task { NodeClassification, GraphRegression };

std::string to_string(Fusion f);
std::string to_string(Mode m);
std::string to_string(Task t);
Fusion fusion_from_string(const std::string& s);
Mode mode_from_string(const std::string& s);

/// Per-layer weight pair for the two propagation paths. In UndirectedTied
/// mode w2 is empty and w1 serves both paths (one shared Variable on tape).
struct LayerWeights {
  Matrixd w1;
  Matrixd w2;
};

struct ModelConfig {
  std::vector<Index> widths;  // feature dim, hidden..., output dim
  Fusion fusion = Fusion::Sum;
  Mode mode = Mode::Directed;
  Task task = Task::NodeClassification;
  double dropout = 0.5;
};

/// The AGNN parameters: L layers of (W1, W2), the fusion/mode/task tags, and
/// the task head weights. Mutable only between optimizer steps; forward is
/// read-only over the weights.
struct AgnnModel {
  std::vector<Index> widths;
  Fusion fusion = Fusion::Sum;
  Mode mode = Mode::Directed;
  Task task = Task::NodeClassification;
  double dropout = 0.5;

  std::vector<LayerWeights> layers;
  Matrixd concat_projection;  // node task + Concat fusion: (2C x C), else empty
  Matrixd fc_w, fc_b;         // graph task: (2d x d), (1 x d)
  Matrixd out_w, out_b;       // graph task: (d x 1), (1 x 1)

  Index num_layers() const { return static_cast<Index>(layers.size()); }
  Index feature_dim() const { return widths.front(); }
  Index output_dim() const { return widths.back(); }
  bool tied() const { return mode == Mode::UndirectedTied; }

  /// All trainable tensors in canonical order (checkpoint/optimizer order).
  std::vector<Matrixd*> parameters();
  std::vector<const Matrixd*> parameters() const;
  std::vector<std::string> parameter_names() const;
};

/// Scaled-uniform fan-based initialization, deterministic in seed:
/// U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))) per entry.
AgnnModel init_weights(const ModelConfig& config, std::uint64_t seed);

/// Per-forward tape handles.
struct ForwardVars {
  std::vector<Var> params;      // aligned with AgnnModel::parameters()
  std::vector<Var> s_messages;  // A_tilde * S^{l-1} per layer
  std::vector<Var> r_messages;  // A_hat * R^{l-1} per layer
  std::vector<Var> s_layers;    // S^1..S^L
  std::vector<Var> r_layers;    // R^1..R^L
  Var s_final, r_final;
};

/// The stacked asymmetric forward pass: S^l = act(A_tilde S^{l-1} W1^l),
/// R^l = act(A_hat R^{l-1} W2^l); relu on hidden layers, identity on the
/// last. Dropout on each layer's input when training (tied mode shares the
/// mask between the two paths).
ForwardVars forward(Tape& tape, const AgnnModel& model, const PropagationOperators& ops,
                    const Matrixd& features, bool training, std::uint64_t dropout_seed);

/// Merge S^L and R^L. Sum: R+S; Mean: (R+S)/2; Max: entrywise (ties take the
/// S entry); Concat: [R || S], followed by the trained 2C -> C projection for
/// node classification.
Var fuse(Tape& tape, const AgnnModel& model, ForwardVars& fv);

/// Row-stochastic class probabilities from fused logits.
Matrixd node_head(const Matrixd& fused_logits, Index num_classes);

/// FC([R || S]) per node, column-sum readout over nodes, then a final linear
/// map to one output. Returns a 1x1 Var.
Var graph_head(Tape& tape, const AgnnModel& model, ForwardVars& fv);

/// Evaluation-mode probabilities for a node-classification model.
Matrixd predict_probabilities(const AgnnModel& model, const PropagationOperators& ops,
                              const Matrixd& features);

/// Evaluation-mode scalar prediction for a graph-regression model.
double predict_graph(const AgnnModel& model, const PropagationOperators& ops,
                     const Matrixd& features);

/// Versioned textual checkpoint with hexfloat payload; round-trips bit-exact.
void save_model(const std::string& path, const AgnnModel& model);
AgnnModel load_model(const std::string& path);

}  // namespace agnn
