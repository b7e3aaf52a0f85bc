#include "agnn/loss.hpp"

#include <cmath>

#include "agnn/error.hpp"
#include "agnn/linalg.hpp"

namespace agnn {

Var cross_entropy(Tape& tape, Var logits, const LabelSet& labeled) {
  if (labeled.indices.empty()) {
    throw ContractError("cross_entropy: empty label set");
  }
  return tape.softmax_cross_entropy(logits, labeled.indices, labeled.labels);
}

double cross_entropy_value(const Matrixd& probabilities, const LabelSet& labeled) {
  if (labeled.indices.empty()) {
    throw ContractError("cross_entropy: empty label set");
  }
  double loss = 0.0;
  for (std::size_t k = 0; k < labeled.indices.size(); ++k) {
    loss -= std::log(probabilities(labeled.indices[k], labeled.labels[k]));
  }
  return loss;
}

double edge_likelihood(Eigen::Ref<const Eigen::RowVectorXd> s_i,
                       Eigen::Ref<const Eigen::RowVectorXd> r_j) {
  if (s_i.size() != r_j.size()) {
    throw DimensionError("edge_likelihood: vector lengths differ");
  }
  return sigmoid_scalar(s_i.dot(r_j));
}

Var regularization_loss(Tape& tape, Var s, Var r, const SpMat& adjacency) {
  return tape.edge_nll(s, r, adjacency);
}

Var regularization_loss_sampled(Tape& tape, Var s, Var r, const SpMat& adjacency,
                                int negatives_per_edge, std::uint64_t seed) {
  return tape.edge_nll_sampled(s, r, adjacency, negatives_per_edge, seed);
}

LossReport total_loss(double error, double reg, double lambda) {
  if (lambda < 0.0) {
    throw ConfigError("total_loss: lambda must be non-negative");
  }
  return LossReport{error, reg, error + lambda * reg, lambda};
}

Var total_loss(Tape& tape, Var error, Var reg, double lambda) {
  if (lambda < 0.0) {
    throw ConfigError("total_loss: lambda must be non-negative");
  }
  return tape.add(error, tape.scale(reg, lambda));
}

Var regression_loss(Tape& tape, Var predictions, const Matrixd& targets) {
  require_same_shape(tape.value(predictions), targets, "regression_loss");
  const Var diff = tape.sub(predictions, tape.constant(targets));
  return tape.mean(tape.hadamard(diff, diff));
}

double regression_loss_value(const Matrixd& predictions, const Matrixd& targets) {
  require_same_shape(predictions, targets, "regression_loss");
  return (predictions - targets).array().square().mean();
}

}  // namespace agnn
