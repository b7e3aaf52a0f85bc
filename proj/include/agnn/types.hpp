#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace agnn {

using Index = Eigen::Index;

/// Dense 2-D tensor, row-major. Every numeric value in the engine lives in
/// one of these; the working scalar is double throughout (gradient checks
/// demand 64-bit precision).
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Compressed-sparse-row matrix. Once compressed, inner (column) indices are
/// strictly increasing within each row and no explicit zeros are stored.
template <class Scalar>
using Csr = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

using Matrixd = Mat<double>;
using SpMat = Csr<double>;

}  // namespace agnn
