#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "agnn/types.hpp"

namespace agnn {

using EdgeList = std::vector<std::pair<Index, Index>>;

/// Immutable directed graph. Rows of the adjacency index out-nodes, columns
/// index in-nodes: adjacency(i, j) == 1 iff there is an edge i -> j. Entries
/// are binary, edges are deduplicated, input self-loops are kept.
struct DirectedGraph {
  Index n = 0;
  EdgeList edges;           // deduplicated, sorted (source, target) pairs
  SpMat adjacency;          // n x n, entries in {0, 1}
  Eigen::VectorXi in_degree;   // column sums of adjacency
  Eigen::VectorXi out_degree;  // row sums of adjacency
  std::optional<Matrixd> features;  // n x d when present
};

/// The dual propagation operators. a_hat is the exact transpose of a_tilde:
/// P^{-1/2}(A^T + I)O^{-1/2} == (O^{-1/2}(A + I)P^{-1/2})^T algebraically,
/// and the implementation materializes it as a transpose so the identity
/// holds bit-exactly.
struct PropagationOperators {
  SpMat a_tilde;  // outgoing propagation, O^{-1/2}(A + I)P^{-1/2}
  SpMat a_hat;    // incoming propagation, a_tilde transposed
};

/// Build a graph from (source, target) pairs. Duplicates are stored once.
/// Throws InputError for n == 0 or an index out of range.
DirectedGraph from_edge_list(Index n, std::span<const std::pair<Index, Index>> pairs);
DirectedGraph from_edge_list(Index n, const EdgeList& pairs);

/// Identity feature matrix for graphs without node attributes.
Matrixd one_hot_features(const DirectedGraph& g);

/// Normalized operators of the self-loop-augmented adjacency. Degrees are
/// computed on A + I (not A), so every node has in- and out-degree >= 1 and
/// no normalization divides by zero.
PropagationOperators build_operators(const DirectedGraph& g);

/// Undirected relaxation: A <- max(A, A^T) entrywise, degrees recomputed.
/// Features carry over unchanged.
DirectedGraph symmetrize(const DirectedGraph& g);

}  // namespace agnn
