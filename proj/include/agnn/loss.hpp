#pragma once

#include <vector>

#include "agnn/autodiff.hpp"
#include "agnn/types.hpp"

namespace agnn {

/// Labeled node (or graph) ids. For classification `labels` holds class ids
/// < num_classes; for regression `targets` holds real values and the other
/// two fields are unused.
struct LabelSet {
  std::vector<Index> indices;
  std::vector<Index> labels;
  std::vector<double> targets;
  Index num_classes = 0;
};

/// Decomposition of the training objective: total = error + lambda * reg.
struct LossReport {
  double error_term = 0.0;
  double reg_term = 0.0;
  double total = 0.0;
  double lambda = 0.0;
};

/// Cross-entropy over the labeled rows of `logits`, fused with the softmax in
/// log-sum-exp form: -sum_l ln Z[l, y_l]. Empty label set -> ContractError.
Var cross_entropy(Tape& tape, Var logits, const LabelSet& labeled);

/// Value-only variant for an already row-stochastic prediction matrix.
double cross_entropy_value(const Matrixd& probabilities, const LabelSet& labeled);

/// sigmoid(s_i . r_j): Bernoulli probability of the edge i -> j.
double edge_likelihood(Eigen::Ref<const Eigen::RowVectorXd> s_i,
                       Eigen::Ref<const Eigen::RowVectorXd> r_j);

/// Full-graph edge negative log-likelihood averaged over all n^2 ordered
/// pairs (diagonal included; `adjacency` is the original A without added
/// self-loops). Differentiable through S and R.
Var regularization_loss(Tape& tape, Var s, Var r, const SpMat& adjacency);

/// Negative-sampling approximation of regularization_loss; not part of the
/// exact objective, intended for graphs too large for the dense n^2 pass.
Var regularization_loss_sampled(Tape& tape, Var s, Var r, const SpMat& adjacency,
                                int negatives_per_edge, std::uint64_t seed);

/// Combine already-evaluated terms. lambda < 0 -> ConfigError.
LossReport total_loss(double error, double reg, double lambda);

/// Tape-level combination: error + lambda * reg as a differentiable scalar.
Var total_loss(Tape& tape, Var error, Var reg, double lambda);

/// Mean squared error between predictions and targets of equal shape.
Var regression_loss(Tape& tape, Var predictions, const Matrixd& targets);
double regression_loss_value(const Matrixd& predictions, const Matrixd& targets);

}  // namespace agnn
