#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

#include "agnn/types.hpp"

namespace agnn {

/// Handle into a Tape. Cheap to copy; only meaningful together with the tape
/// that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation record. Each recorded operation appends one
/// node holding the forward value, parent references and whatever locals the
/// backward rule needs. Parents always precede children, so one reverse sweep
/// propagates gradients; gradients accumulate additively at fan-out.
///
/// Sparse operands (the propagation operators and the adjacency) enter as
/// borrowed constants: no gradient flows into graph structure, and the caller
/// keeps them alive for the lifetime of the tape.
///
/// A tape is single-threaded; independent tapes may run concurrently.
class Tape {
 public:
  // -- leaves -----------------------------------------------------------
  Var input(Matrixd value, bool trainable = false);
  Var constant(Matrixd value) { return input(std::move(value), false); }

  // -- recorded operations ----------------------------------------------
  Var matmul(Var a, Var b);
  /// a * b^T without materializing the transpose.
  Var matmul_bt(Var a, Var b);
  Var spmm(const SpMat& s, Var d);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double c);
  /// x + replicated bias; bias must be 1 x cols. The only broadcasting form.
  Var add_row_vector(Var x, Var bias);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var sum(Var a);
  Var mean(Var a);
  /// Max reduction to 1x1; gradient routes to the argmax entry only, ties
  /// broken by lowest row-major index.
  Var max(Var a);
  /// Entrywise max; ties take the first operand's entry.
  Var maximum(Var a, Var b);
  Var col_sum(Var a);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, Index start, Index count);
  /// Inverted dropout: kept entries scale by 1/(1-rate). Mask is derived
  /// from the seed alone, so the same seed reproduces the same mask.
  Var dropout(Var a, double rate, std::uint64_t seed);
  /// Fused softmax + cross-entropy over the selected rows, computed in
  /// log-sum-exp form: sum_k (logsumexp(x_rk) - x_rk[y_k]). Returns 1x1.
  Var softmax_cross_entropy(Var logits, std::span<const Index> rows,
                            std::span<const Index> labels);
  /// Bernoulli negative log-likelihood of the full pairwise edge model,
  /// averaged over all n^2 ordered pairs:
  ///   (1/n^2) sum_ij [softplus(s_i . r_j) - (s_i . r_j) a_ij].
  Var edge_nll(Var s, Var r, const SpMat& adjacency);
  /// Unbiased sampled estimate of edge_nll: positives enumerated exactly,
  /// k * max(|E|, 1) uniformly sampled non-edge pairs weighted by
  /// (n^2 - |E|) / m. An approximation for graphs too large for the dense
  /// pairwise pass.
  Var edge_nll_sampled(Var s, Var r, const SpMat& adjacency, int k, std::uint64_t seed);

  /// Tag-dispatch entry for the ops whose signature is plain Vars.
  /// Unsupported tags raise ConfigError.
  Var record(std::string_view op_tag, std::span<const Var> inputs);

  /// Propagate d(loss)/d(node) to every node. loss must be 1x1. All
  /// gradients are reset first, so repeated calls are idempotent.
  void backward(Var loss);

  const Matrixd& value(Var v) const;
  const Matrixd& grad(Var v) const;
  bool trainable(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf, MatMul, MatMulBT, Spmm, Add, Sub, Hadamard, Scale, AddRowVec,
    Relu, Sigmoid, Softplus, Sum, Mean, MaxReduce, Maximum, ColSum,
    ConcatCols, SliceCols, Dropout, SoftmaxXent, EdgeNll, EdgeNllSampled,
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    bool trainable = false;
    double scalar = 0.0;                  // Scale factor
    Index i0 = 0, i1 = 0;                 // SliceCols start/count
    const SpMat* sparse = nullptr;        // Spmm / EdgeNll operand (borrowed)
    std::vector<Index> rows, labels;      // SoftmaxXent selection
    // Sampled pairs: (i, j, weight, a_ij).
    std::vector<std::tuple<Index, Index, double, double>> pairs;
    Matrixd aux;                          // dropout mask / softmax probs / max mask
    Matrixd value;
    Matrixd grad;
  };

  int require(Var v) const;
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(require(v))]; }
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(require(v))]; }
  Var push(Node n);

  std::vector<Node> nodes_;
};

}  // namespace agnn
