#pragma once

#include <cmath>
#include <string_view>

#include "agnn/error.hpp"
#include "agnn/types.hpp"

namespace agnn {

// ---------------------------------------------------------------------------
// Scalar kernels. Branchy stable forms: sigmoid never exponentiates a
// positive argument, softplus uses max(x,0) + log1p(exp(-|x|)).
// ---------------------------------------------------------------------------

template <class Scalar>
inline Scalar sigmoid_scalar(Scalar x) {
  if (x >= Scalar(0)) {
    const Scalar e = std::exp(-x);
    return Scalar(1) / (Scalar(1) + e);
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <class Scalar>
inline Scalar softplus_scalar(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

// ---------------------------------------------------------------------------
// Expression-friendly elementwise free functions.
// ---------------------------------------------------------------------------

template <class Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.derived().cwiseMax(Scalar(0));
}

template <class Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.derived().unaryExpr([](Scalar v) { return sigmoid_scalar(v); });
}

template <class Derived>
auto softplus(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.derived().unaryExpr([](Scalar v) { return softplus_scalar(v); });
}

// ---------------------------------------------------------------------------
// Shape and finiteness contracts.
// ---------------------------------------------------------------------------

void require_same_shape(const Matrixd& a, const Matrixd& b, std::string_view what);
void require_inner_match(Index a_cols, Index b_rows, std::string_view what);
void require_finite(const Matrixd& m, std::string_view what);

// ---------------------------------------------------------------------------
// Checked dense / sparse kernels (double working type).
// ---------------------------------------------------------------------------

/// Standard matrix product; shape-checked, result checked finite.
Matrixd matmul(const Matrixd& a, const Matrixd& b);

/// Dense copy of a CSR matrix.
Matrixd densify(const SpMat& s);

/// Sparse-dense product. Hand-rolled row loop so each output entry sums the
/// stored entries of its row in ascending column-index order; this fixed
/// order is the determinism contract the rest of the engine relies on.
Matrixd spmm(const SpMat& s, const Matrixd& d);

/// Elementwise sum; shapes must match (no broadcasting here).
Matrixd add(const Matrixd& a, const Matrixd& b);

/// Elementwise product; shapes must match.
Matrixd hadamard(const Matrixd& a, const Matrixd& b);

/// Multiply every entry by c.
Matrixd scale(const Matrixd& a, double c);

/// Row-wise softmax with row-max subtraction; each row sums to 1.
Matrixd row_softmax(const Matrixd& a);

}  // namespace agnn
