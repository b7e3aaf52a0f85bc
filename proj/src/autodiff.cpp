#include "agnn/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "agnn/error.hpp"
#include "agnn/linalg.hpp"
#include "agnn/rng.hpp"

namespace agnn {

namespace {

std::string shape_str(const Matrixd& m) {
  std::ostringstream s;
  s << m.rows() << "x" << m.cols();
  return s.str();
}

}  // namespace

int Tape::require(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractError("tape: variable does not belong to this tape");
  }
  return v.id;
}

Var Tape::push(Node n) {
  require_finite(n.value, "tape op");
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Matrixd value, bool trainable) {
  Node n;
  n.op = Op::Leaf;
  n.trainable = trainable;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Matrixd& av = value(a);
  const Matrixd& bv = value(b);
  require_inner_match(av.cols(), bv.rows(), "tape matmul");
  Node n;
  n.op = Op::MatMul;
  n.a = require(a);
  n.b = require(b);
  n.value = av * bv;
  return push(std::move(n));
}

Var Tape::matmul_bt(Var a, Var b) {
  const Matrixd& av = value(a);
  const Matrixd& bv = value(b);
  require_inner_match(av.cols(), bv.cols(), "tape matmul_bt");
  Node n;
  n.op = Op::MatMulBT;
  n.a = require(a);
  n.b = require(b);
  n.value = av * bv.transpose();
  return push(std::move(n));
}

Var Tape::spmm(const SpMat& s, Var d) {
  Node n;
  n.op = Op::Spmm;
  n.a = require(d);
  n.sparse = &s;
  n.value = agnn::spmm(s, value(d));
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "tape add");
  Node n;
  n.op = Op::Add;
  n.a = require(a);
  n.b = require(b);
  n.value = value(a) + value(b);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "tape sub");
  Node n;
  n.op = Op::Sub;
  n.a = require(a);
  n.b = require(b);
  n.value = value(a) - value(b);
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  require_same_shape(value(a), value(b), "tape hadamard");
  Node n;
  n.op = Op::Hadamard;
  n.a = require(a);
  n.b = require(b);
  n.value = value(a).cwiseProduct(value(b));
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = require(a);
  n.scalar = c;
  n.value = value(a) * c;
  return push(std::move(n));
}

Var Tape::add_row_vector(Var x, Var bias) {
  const Matrixd& xv = value(x);
  const Matrixd& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw DimensionError("tape add_row_vector: bias must be 1x" +
                         std::to_string(xv.cols()) + ", got " + shape_str(bv));
  }
  Node n;
  n.op = Op::AddRowVec;
  n.a = require(x);
  n.b = require(bias);
  n.value = xv.rowwise() + bv.row(0);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.a = require(a);
  n.value = agnn::relu(value(a));
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = require(a);
  n.value = agnn::sigmoid(value(a));
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  Node n;
  n.op = Op::Softplus;
  n.a = require(a);
  n.value = agnn::softplus(value(a));
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.a = require(a);
  n.value = Matrixd::Constant(1, 1, value(a).sum());
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  Node n;
  n.op = Op::Mean;
  n.a = require(a);
  n.value = Matrixd::Constant(1, 1, value(a).mean());
  return push(std::move(n));
}

Var Tape::max(Var a) {
  const Matrixd& av = value(a);
  if (av.size() == 0) {
    throw DimensionError("tape max: empty operand");
  }
  Node n;
  n.op = Op::MaxReduce;
  n.a = require(a);
  // Row-major scan; first hit wins, which fixes the tie-break rule.
  Index best_r = 0, best_c = 0;
  double best = av(0, 0);
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index j = 0; j < av.cols(); ++j) {
      if (av(i, j) > best) {
        best = av(i, j);
        best_r = i;
        best_c = j;
      }
    }
  }
  n.i0 = best_r;
  n.i1 = best_c;
  n.value = Matrixd::Constant(1, 1, best);
  return push(std::move(n));
}

Var Tape::maximum(Var a, Var b) {
  const Matrixd& av = value(a);
  const Matrixd& bv = value(b);
  require_same_shape(av, bv, "tape maximum");
  Node n;
  n.op = Op::Maximum;
  n.a = require(a);
  n.b = require(b);
  // aux == 1 where the first operand wins (ties included).
  n.aux = (av.array() >= bv.array()).cast<double>();
  n.value = av.cwiseMax(bv);
  return push(std::move(n));
}

Var Tape::col_sum(Var a) {
  Node n;
  n.op = Op::ColSum;
  n.a = require(a);
  n.value = value(a).colwise().sum();
  return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrixd& av = value(a);
  const Matrixd& bv = value(b);
  if (av.rows() != bv.rows()) {
    throw DimensionError("tape concat_cols: row counts differ (" + shape_str(av) +
                         " vs " + shape_str(bv) + ")");
  }
  Node n;
  n.op = Op::ConcatCols;
  n.a = require(a);
  n.b = require(b);
  n.value.resize(av.rows(), av.cols() + bv.cols());
  n.value.leftCols(av.cols()) = av;
  n.value.rightCols(bv.cols()) = bv;
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, Index start, Index count) {
  const Matrixd& av = value(a);
  if (start < 0 || count < 0 || start + count > av.cols()) {
    throw DimensionError("tape slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " + shape_str(av));
  }
  Node n;
  n.op = Op::SliceCols;
  n.a = require(a);
  n.i0 = start;
  n.i1 = count;
  n.value = av.middleCols(start, count);
  return push(std::move(n));
}

Var Tape::dropout(Var a, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  const Matrixd& av = value(a);
  Node n;
  n.op = Op::Dropout;
  n.a = require(a);
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  n.aux.resize(av.rows(), av.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index j = 0; j < av.cols(); ++j) {
      n.aux(i, j) = rng.uniform() < rate ? 0.0 : keep_scale;
    }
  }
  n.value = av.cwiseProduct(n.aux);
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const Index> rows,
                                std::span<const Index> labels) {
  const Matrixd& x = value(logits);
  if (rows.size() != labels.size()) {
    throw ContractError("softmax_cross_entropy: rows/labels length mismatch");
  }
  if (rows.empty()) {
    throw ContractError("softmax_cross_entropy: empty label set");
  }
  Node n;
  n.op = Op::SoftmaxXent;
  n.a = require(logits);
  n.rows.assign(rows.begin(), rows.end());
  n.labels.assign(labels.begin(), labels.end());
  n.aux.resize(static_cast<Index>(rows.size()), x.cols());
  double loss = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index r = rows[k];
    const Index y = labels[k];
    if (r < 0 || r >= x.rows()) {
      throw ContractError("softmax_cross_entropy: row index out of range");
    }
    if (y < 0 || y >= x.cols()) {
      throw ContractError("softmax_cross_entropy: label out of range");
    }
    const double m = x.row(r).maxCoeff();
    const Eigen::ArrayXd e = (x.row(r).array() - m).exp();
    const double z = e.sum();
    n.aux.row(static_cast<Index>(k)) = (e / z).matrix();
    loss += m + std::log(z) - x(r, y);
  }
  n.value = Matrixd::Constant(1, 1, loss);
  return push(std::move(n));
}

Var Tape::edge_nll(Var s, Var r, const SpMat& adjacency) {
  const Matrixd& sv = value(s);
  const Matrixd& rv = value(r);
  require_same_shape(sv, rv, "edge_nll");
  if (adjacency.rows() != sv.rows() || adjacency.cols() != sv.rows()) {
    throw DimensionError("edge_nll: adjacency must be n x n with n = embedding rows");
  }
  Node n;
  n.op = Op::EdgeNll;
  n.a = require(s);
  n.b = require(r);
  n.sparse = &adjacency;

  // Pairwise logits; recomputed in backward rather than cached (n^2 memory).
  const Matrixd logits = sv * rv.transpose();
  double acc = agnn::softplus(logits).sum();
  for (Index i = 0; i < adjacency.outerSize(); ++i) {
    for (SpMat::InnerIterator it(adjacency, i); it; ++it) {
      acc -= logits(it.row(), it.col()) * it.value();
    }
  }
  const double n2 = static_cast<double>(sv.rows()) * static_cast<double>(sv.rows());
  n.value = Matrixd::Constant(1, 1, acc / n2);
  return push(std::move(n));
}

Var Tape::edge_nll_sampled(Var s, Var r, const SpMat& adjacency, int k,
                           std::uint64_t seed) {
  const Matrixd& sv = value(s);
  const Matrixd& rv = value(r);
  require_same_shape(sv, rv, "edge_nll_sampled");
  const Index nn = sv.rows();
  if (adjacency.rows() != nn || adjacency.cols() != nn) {
    throw DimensionError("edge_nll_sampled: adjacency must be n x n");
  }
  if (k <= 0) {
    throw ConfigError("edge_nll_sampled: k must be positive");
  }

  Node n;
  n.op = Op::EdgeNllSampled;
  n.a = require(s);
  n.b = require(r);

  const auto num_edges = static_cast<double>(adjacency.nonZeros());
  const double n2 = static_cast<double>(nn) * static_cast<double>(nn);

  // Positives enumerated exactly, weight 1.
  for (Index i = 0; i < adjacency.outerSize(); ++i) {
    for (SpMat::InnerIterator it(adjacency, i); it; ++it) {
      n.pairs.emplace_back(it.row(), it.col(), 1.0, 1.0);
    }
  }
  // Uniform non-edge negatives, each standing in for (n^2 - |E|) / m pairs.
  // A complete graph has no non-edges and their total weight is zero.
  if (n2 - num_edges > 0.0) {
    const auto m = static_cast<std::size_t>(k) *
                   std::max<std::size_t>(static_cast<std::size_t>(num_edges), 1);
    const double neg_weight = (n2 - num_edges) / static_cast<double>(m);
    Rng rng(seed);
    for (std::size_t t = 0; t < m; ++t) {
      Index i = 0, j = 0;
      do {
        i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(nn)));
        j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(nn)));
      } while (adjacency.coeff(i, j) != 0.0);
      n.pairs.emplace_back(i, j, neg_weight, 0.0);
    }
  }

  double acc = 0.0;
  for (const auto& [i, j, w, a] : n.pairs) {
    const double t = sv.row(i).dot(rv.row(j));
    acc += w * (softplus_scalar(t) - t * a);
  }
  n.value = Matrixd::Constant(1, 1, acc / n2);
  return push(std::move(n));
}

Var Tape::record(std::string_view op_tag, std::span<const Var> inputs) {
  const auto need = [&](std::size_t arity) {
    if (inputs.size() != arity) {
      throw ConfigError("record: op-tag '" + std::string(op_tag) + "' takes " +
                        std::to_string(arity) + " inputs, got " +
                        std::to_string(inputs.size()));
    }
  };
  if (op_tag == "matmul") { need(2); return matmul(inputs[0], inputs[1]); }
  if (op_tag == "add") { need(2); return add(inputs[0], inputs[1]); }
  if (op_tag == "sub") { need(2); return sub(inputs[0], inputs[1]); }
  if (op_tag == "hadamard") { need(2); return hadamard(inputs[0], inputs[1]); }
  if (op_tag == "maximum") { need(2); return maximum(inputs[0], inputs[1]); }
  if (op_tag == "concat") { need(2); return concat_cols(inputs[0], inputs[1]); }
  if (op_tag == "relu") { need(1); return relu(inputs[0]); }
  if (op_tag == "sigmoid") { need(1); return sigmoid(inputs[0]); }
  if (op_tag == "softplus") { need(1); return softplus(inputs[0]); }
  if (op_tag == "sum") { need(1); return sum(inputs[0]); }
  if (op_tag == "mean") { need(1); return mean(inputs[0]); }
  if (op_tag == "max") { need(1); return max(inputs[0]); }
  throw ConfigError("record: unsupported op-tag '" + std::string(op_tag) + "'");
}

const Matrixd& Tape::value(Var v) const { return node(v).value; }

const Matrixd& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0 && n.value.size() != 0) {
    throw ContractError("tape: grad requested before backward");
  }
  return n.grad;
}

bool Tape::trainable(Var v) const { return node(v).trainable; }

void Tape::backward(Var loss) {
  Node& top = node(loss);
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw ContractError("backward: loss must be a 1x1 scalar, got " +
                        shape_str(top.value));
  }
  for (Node& n : nodes_) {
    n.grad.setZero(n.value.rows(), n.value.cols());
  }
  top.grad(0, 0) = 1.0;

  for (int idx = static_cast<int>(nodes_.size()) - 1; idx >= 0; --idx) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.grad.size() == 0) continue;
    const Matrixd& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        Node& pb = nodes_[static_cast<std::size_t>(n.b)];
        pa.grad.noalias() += g * pb.value.transpose();
        pb.grad.noalias() += pa.value.transpose() * g;
        break;
      }
      case Op::MatMulBT: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        Node& pb = nodes_[static_cast<std::size_t>(n.b)];
        pa.grad.noalias() += g * pb.value;
        pb.grad.noalias() += g.transpose() * pa.value;
        break;
      }
      case Op::Spmm: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        pa.grad.noalias() += n.sparse->transpose() * g;
        break;
      }
      case Op::Add: {
        nodes_[static_cast<std::size_t>(n.a)].grad += g;
        nodes_[static_cast<std::size_t>(n.b)].grad += g;
        break;
      }
      case Op::Sub: {
        nodes_[static_cast<std::size_t>(n.a)].grad += g;
        nodes_[static_cast<std::size_t>(n.b)].grad -= g;
        break;
      }
      case Op::Hadamard: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        Node& pb = nodes_[static_cast<std::size_t>(n.b)];
        pa.grad += g.cwiseProduct(pb.value);
        pb.grad += g.cwiseProduct(pa.value);
        break;
      }
      case Op::Scale: {
        nodes_[static_cast<std::size_t>(n.a)].grad += n.scalar * g;
        break;
      }
      case Op::AddRowVec: {
        nodes_[static_cast<std::size_t>(n.a)].grad += g;
        nodes_[static_cast<std::size_t>(n.b)].grad += g.colwise().sum();
        break;
      }
      case Op::Relu: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        pa.grad += g.cwiseProduct((pa.value.array() > 0.0).cast<double>().matrix());
        break;
      }
      case Op::Sigmoid: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        pa.grad += g.cwiseProduct(
            (n.value.array() * (1.0 - n.value.array())).matrix());
        break;
      }
      case Op::Softplus: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        pa.grad += g.cwiseProduct(agnn::sigmoid(pa.value).eval());
        break;
      }
      case Op::Sum: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        pa.grad.array() += g(0, 0);
        break;
      }
      case Op::Mean: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        pa.grad.array() += g(0, 0) / static_cast<double>(pa.value.size());
        break;
      }
      case Op::MaxReduce: {
        nodes_[static_cast<std::size_t>(n.a)].grad(n.i0, n.i1) += g(0, 0);
        break;
      }
      case Op::Maximum: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        Node& pb = nodes_[static_cast<std::size_t>(n.b)];
        pa.grad += g.cwiseProduct(n.aux);
        pb.grad += g.cwiseProduct((1.0 - n.aux.array()).matrix());
        break;
      }
      case Op::ColSum: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        pa.grad += g.replicate(pa.value.rows(), 1);
        break;
      }
      case Op::ConcatCols: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        Node& pb = nodes_[static_cast<std::size_t>(n.b)];
        pa.grad += g.leftCols(pa.value.cols());
        pb.grad += g.rightCols(pb.value.cols());
        break;
      }
      case Op::SliceCols: {
        nodes_[static_cast<std::size_t>(n.a)].grad.middleCols(n.i0, n.i1) += g;
        break;
      }
      case Op::Dropout: {
        nodes_[static_cast<std::size_t>(n.a)].grad += g.cwiseProduct(n.aux);
        break;
      }
      case Op::SoftmaxXent: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        const double up = g(0, 0);
        for (std::size_t k = 0; k < n.rows.size(); ++k) {
          pa.grad.row(n.rows[k]) += up * n.aux.row(static_cast<Index>(k));
          pa.grad(n.rows[k], n.labels[k]) -= up;
        }
        break;
      }
      case Op::EdgeNll: {
        Node& ps = nodes_[static_cast<std::size_t>(n.a)];
        Node& pr = nodes_[static_cast<std::size_t>(n.b)];
        const double n2 = static_cast<double>(ps.value.rows()) *
                          static_cast<double>(ps.value.rows());
        Matrixd dlogits = agnn::sigmoid(ps.value * pr.value.transpose()).eval();
        dlogits -= *n.sparse;
        dlogits *= g(0, 0) / n2;
        ps.grad.noalias() += dlogits * pr.value;
        pr.grad.noalias() += dlogits.transpose() * ps.value;
        break;
      }
      case Op::EdgeNllSampled: {
        Node& ps = nodes_[static_cast<std::size_t>(n.a)];
        Node& pr = nodes_[static_cast<std::size_t>(n.b)];
        const double n2 = static_cast<double>(ps.value.rows()) *
                          static_cast<double>(ps.value.rows());
        const double up = g(0, 0) / n2;
        for (const auto& [i, j, w, a] : n.pairs) {
          const double t = ps.value.row(i).dot(pr.value.row(j));
          const double coef = up * w * (sigmoid_scalar(t) - a);
          ps.grad.row(i) += coef * pr.value.row(j);
          pr.grad.row(j) += coef * ps.value.row(i);
        }
        break;
      }
    }
  }
}

}  // namespace agnn
