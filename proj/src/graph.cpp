#include "agnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "agnn/error.hpp"

namespace agnn {

namespace {

SpMat binary_csr(Index n, const EdgeList& edges) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size());
  for (const auto& [u, v] : edges) {
    trips.emplace_back(static_cast<int>(u), static_cast<int>(v), 1.0);
  }
  SpMat a(n, n);
  // Duplicates collapse to 1 instead of summing; keeps entries binary.
  a.setFromTriplets(trips.begin(), trips.end(), [](double, double) { return 1.0; });
  a.makeCompressed();
  return a;
}

void compute_degrees(const SpMat& a, Eigen::VectorXi& in_deg, Eigen::VectorXi& out_deg) {
  const Index n = a.rows();
  in_deg = Eigen::VectorXi::Zero(n);
  out_deg = Eigen::VectorXi::Zero(n);
  for (Index i = 0; i < n; ++i) {
    for (SpMat::InnerIterator it(a, i); it; ++it) {
      out_deg[it.row()] += 1;
      in_deg[it.col()] += 1;
    }
  }
}

}  // namespace

DirectedGraph from_edge_list(Index n, std::span<const std::pair<Index, Index>> pairs) {
  if (n <= 0) {
    throw InputError("from_edge_list: node count must be positive");
  }
  EdgeList edges(pairs.begin(), pairs.end());
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n) {
      std::ostringstream msg;
      msg << "from_edge_list: edge (" << u << ", " << v << ") out of range for n = " << n;
      throw InputError(msg.str());
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  DirectedGraph g;
  g.n = n;
  g.edges = std::move(edges);
  g.adjacency = binary_csr(n, g.edges);
  compute_degrees(g.adjacency, g.in_degree, g.out_degree);
  return g;
}

DirectedGraph from_edge_list(Index n, const EdgeList& pairs) {
  return from_edge_list(n, std::span<const std::pair<Index, Index>>(pairs));
}

Matrixd one_hot_features(const DirectedGraph& g) {
  return Matrixd::Identity(g.n, g.n);
}

PropagationOperators build_operators(const DirectedGraph& g) {
  // B = A + I with the diagonal deduplicated against input self-loops.
  EdgeList augmented = g.edges;
  augmented.reserve(augmented.size() + g.n);
  for (Index i = 0; i < g.n; ++i) augmented.emplace_back(i, i);
  std::sort(augmented.begin(), augmented.end());
  augmented.erase(std::unique(augmented.begin(), augmented.end()), augmented.end());
  const SpMat b = binary_csr(g.n, augmented);

  // Degrees on B, so both are >= 1 for every node.
  Eigen::VectorXi in_b, out_b;
  compute_degrees(b, in_b, out_b);

  SpMat a_tilde = b;
  for (Index i = 0; i < a_tilde.rows(); ++i) {
    for (SpMat::InnerIterator it(a_tilde, i); it; ++it) {
      it.valueRef() = 1.0 / std::sqrt(static_cast<double>(out_b[it.row()]) *
                                      static_cast<double>(in_b[it.col()]));
    }
  }

  PropagationOperators ops;
  ops.a_hat = a_tilde.transpose();
  ops.a_hat.makeCompressed();
  ops.a_tilde = std::move(a_tilde);
  return ops;
}

DirectedGraph symmetrize(const DirectedGraph& g) {
  EdgeList both = g.edges;
  both.reserve(both.size() * 2);
  for (const auto& [u, v] : g.edges) both.emplace_back(v, u);
  DirectedGraph out = from_edge_list(g.n, both);
  out.features = g.features;
  return out;
}

}  // namespace agnn
