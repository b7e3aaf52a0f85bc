#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agnn/graph.hpp"
#include "agnn/loss.hpp"
#include "agnn/model.hpp"
#include "agnn/types.hpp"

namespace agnn {

/// One loaded dataset: graph, materialized features (identity when the
/// dataset carries none), labels and task kind.
struct DatasetBundle {
  DirectedGraph graph;
  Matrixd features;
  LabelSet labels;
  Task task = Task::NodeClassification;
  std::string name;
};

/// Directed stochastic block model: edge u -> v drawn independently with
/// probability pi(block(u), block(v)); pi need not be symmetric. Labels are
/// the block ids; no self-loops are generated.
struct SbmSpec {
  std::vector<Index> block_sizes;
  Matrixd pi;  // block-to-block edge probabilities
  std::uint64_t seed = 1;
};

struct DagSpec {
  int count = 100;
  Index min_size = 8;
  Index max_size = 14;
  double edge_prob = 0.3;
  std::uint64_t seed = 1;
};

/// One graph of a regression set, with its operators prebuilt.
struct GraphSample {
  DirectedGraph graph;
  PropagationOperators ops;
  Matrixd features;
  double target = 0.0;
};

// ---------------------------------------------------------------------------
// File formats (plain text, 0-based integer node ids):
//   edges:    "source<TAB>target" per line; optional header "#nodes N";
//             lines starting with '#' are otherwise comments.
//   features: "id<TAB>v1,v2,...,vd" (comma-separated reals); nodes absent
//             from the file keep zero rows. No file -> one-hot identity.
//   labels:   "id<TAB>class" (node classification).
//   manifest: "edge_file<TAB>target" per line (graph regression); paths are
//             relative to the manifest's directory.
// ---------------------------------------------------------------------------

DatasetBundle load_edge_list_dataset(const std::string& edges_path,
                                     const std::optional<std::string>& features_path,
                                     const std::string& labels_path);

DatasetBundle generate_directed_sbm(const SbmSpec& spec);

/// Random DAGs: a shuffled topological order with forward edges drawn at
/// edge_prob. Target = longest path length / (n - 1), in [0, 1]. Node
/// features are [1, out_degree/n, in_degree/n].
std::vector<GraphSample> generate_dag_regression(const DagSpec& spec);

/// Per-node features for graphs in a regression set.
Matrixd dag_node_features(const DirectedGraph& g);

/// Longest-path length (edge count) of a DAG by DP over a topological order.
Index longest_path_length(const DirectedGraph& g);

// -- writers / loader for the on-disk regression set ------------------------

void write_edge_file(const std::string& path, const DirectedGraph& g);
void write_label_file(const std::string& path, const LabelSet& labels);
void write_feature_file(const std::string& path, const Matrixd& features);

/// Writes one edge file per graph plus the manifest; returns manifest path.
std::string write_graph_set(const std::string& dir, const std::string& stem,
                            const std::vector<GraphSample>& samples);

std::vector<GraphSample> load_graph_set(const std::string& manifest_path);

}  // namespace agnn
