#include "agnn/linalg.hpp"

#include <sstream>

namespace agnn {

void require_same_shape(const Matrixd& a, const Matrixd& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream msg;
    msg << what << ": shape mismatch (" << a.rows() << "x" << a.cols() << " vs "
        << b.rows() << "x" << b.cols() << ")";
    throw DimensionError(msg.str());
  }
}

void require_inner_match(Index a_cols, Index b_rows, std::string_view what) {
  if (a_cols != b_rows) {
    std::ostringstream msg;
    msg << what << ": inner dimensions differ (" << a_cols << " vs " << b_rows << ")";
    throw DimensionError(msg.str());
  }
}

void require_finite(const Matrixd& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite value produced");
  }
}

Matrixd matmul(const Matrixd& a, const Matrixd& b) {
  require_inner_match(a.cols(), b.rows(), "matmul");
  Matrixd out = a * b;
  require_finite(out, "matmul");
  return out;
}

Matrixd densify(const SpMat& s) {
  Matrixd out = Matrixd::Zero(s.rows(), s.cols());
  for (Index i = 0; i < s.outerSize(); ++i) {
    for (SpMat::InnerIterator it(s, i); it; ++it) {
      out(it.row(), it.col()) = it.value();
    }
  }
  return out;
}

Matrixd spmm(const SpMat& s, const Matrixd& d) {
  require_inner_match(s.cols(), d.rows(), "spmm");
  Matrixd out = Matrixd::Zero(s.rows(), d.cols());
  for (Index i = 0; i < s.rows(); ++i) {
    // InnerIterator walks the stored entries of row i in ascending column order.
    for (SpMat::InnerIterator it(s, i); it; ++it) {
      out.row(i) += it.value() * d.row(it.col());
    }
  }
  require_finite(out, "spmm");
  return out;
}

Matrixd add(const Matrixd& a, const Matrixd& b) {
  require_same_shape(a, b, "add");
  Matrixd out = a + b;
  require_finite(out, "add");
  return out;
}

Matrixd hadamard(const Matrixd& a, const Matrixd& b) {
  require_same_shape(a, b, "hadamard");
  Matrixd out = a.cwiseProduct(b);
  require_finite(out, "hadamard");
  return out;
}

Matrixd scale(const Matrixd& a, double c) {
  Matrixd out = a * c;
  require_finite(out, "scale");
  return out;
}

Matrixd row_softmax(const Matrixd& a) {
  Matrixd out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    out.row(i) = (a.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  require_finite(out, "row_softmax");
  return out;
}

}  // namespace agnn
