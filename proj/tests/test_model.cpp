#include "agnn/model.hpp"

#include <cstdio>
#include <doctest.h>
#include <filesystem>

#include "agnn/error.hpp"
#include "agnn/linalg.hpp"
#include "agnn/rng.hpp"

using namespace agnn;

namespace {

Matrixd random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrixd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

EdgeList random_edges(Index n, double density, Rng& rng) {
  EdgeList edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j && rng.uniform() < density) edges.emplace_back(i, j);
    }
  }
  return edges;
}

ModelConfig node_config(std::vector<Index> widths, Fusion fusion = Fusion::Sum,
                        Mode mode = Mode::Directed, double dropout = 0.0) {
  ModelConfig mc;
  mc.widths = std::move(widths);
  mc.fusion = fusion;
  mc.mode = mode;
  mc.task = Task::NodeClassification;
  mc.dropout = dropout;
  return mc;
}

}  // namespace

TEST_CASE("init_weights is deterministic and shape-correct") {
  const ModelConfig mc = node_config({4, 8, 3});
  const AgnnModel a = init_weights(mc, 42);
  const AgnnModel b = init_weights(mc, 42);
  REQUIRE(a.layers.size() == 2);
  CHECK(a.layers[0].w1.rows() == 4);
  CHECK(a.layers[0].w1.cols() == 8);
  CHECK(a.layers[1].w1.rows() == 8);
  CHECK(a.layers[1].w1.cols() == 3);
  CHECK((a.layers[0].w1 - b.layers[0].w1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.layers[1].w2 - b.layers[1].w2).cwiseAbs().maxCoeff() == 0.0);

  const AgnnModel c = init_weights(mc, 43);
  CHECK((a.layers[0].w1 - c.layers[0].w1).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("init_weights sampler statistics") {
  // 100 x 1000 = 1e5 draws; bound = sqrt(6/1100) so the mean's sigma is
  // bound/sqrt(3e5) ~ 1.35e-4, far inside the +/-0.01 gate.
  const AgnnModel m = init_weights(node_config({100, 1000}), 7);
  const Matrixd& w = m.layers[0].w1;
  CHECK(std::abs(w.mean()) <= 0.01);
  const double bound = std::sqrt(6.0 / 1100.0);
  CHECK(w.maxCoeff() <= bound);
  CHECK(w.minCoeff() >= -bound);
}

TEST_CASE("init_weights rejects bad configs") {
  CHECK_THROWS_AS(init_weights(node_config({4}), 1), ConfigError);
  CHECK_THROWS_AS(init_weights(node_config({4, 0, 3}), 1), ConfigError);
}

TEST_CASE("forward on a single isolated node with identity weights") {
  const DirectedGraph g = from_edge_list(1, EdgeList{});
  const PropagationOperators ops = build_operators(g);
  AgnnModel m = init_weights(node_config({1, 1}), 1);
  m.layers[0].w1 = Matrixd::Identity(1, 1);
  m.layers[0].w2 = Matrixd::Identity(1, 1);
  const Matrixd x = Matrixd::Constant(1, 1, 0.37);

  Tape tape;
  const ForwardVars fv = forward(tape, m, ops, x, false, 0);
  CHECK(tape.value(fv.s_final)(0, 0) == doctest::Approx(0.37));
  CHECK(tape.value(fv.r_final)(0, 0) == doctest::Approx(0.37));
}

TEST_CASE("forward hand example on the 2-node chain") {
  // A = [[0,1],[0,0]], W1 = W2 = [[1]], X = [1, 1]^T, one layer:
  // S^1 = A_tilde X = [1/sqrt(2) + 1/2, 1/sqrt(2)]^T,
  // R^1 = A_tilde^T X = [1/sqrt(2), 1/2 + 1/sqrt(2)]^T.
  const DirectedGraph g = from_edge_list(2, EdgeList{{0, 1}});
  const PropagationOperators ops = build_operators(g);
  AgnnModel m = init_weights(node_config({1, 1}), 1);
  m.layers[0].w1 = Matrixd::Identity(1, 1);
  m.layers[0].w2 = Matrixd::Identity(1, 1);
  const Matrixd x = Matrixd::Ones(2, 1);

  Tape tape;
  const ForwardVars fv = forward(tape, m, ops, x, false, 0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(tape.value(fv.s_final)(0, 0) == doctest::Approx(inv_sqrt2 + 0.5).epsilon(1e-12));
  CHECK(tape.value(fv.s_final)(1, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(tape.value(fv.r_final)(0, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(tape.value(fv.r_final)(1, 0) == doctest::Approx(0.5 + inv_sqrt2).epsilon(1e-12));

  // The aggregated messages are the raw operator products.
  CHECK((tape.value(fv.s_messages[0]) - spmm(ops.a_tilde, x)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((tape.value(fv.r_messages[0]) - spmm(ops.a_hat, x)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("undirected-tied mode on a symmetric graph keeps S == R at every layer") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 4 + static_cast<Index>(rng.below(8));
    EdgeList edges;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        if (rng.uniform() < 0.4) {
          edges.emplace_back(i, j);
          edges.emplace_back(j, i);
        }
      }
    }
    const DirectedGraph g = from_edge_list(n, edges);
    const PropagationOperators ops = build_operators(g);
    const AgnnModel m = init_weights(node_config({3, 5, 2}, Fusion::Sum,
                                                 Mode::UndirectedTied), 11);
    const Matrixd x = random_matrix(n, 3, rng);

    Tape tape;
    AgnnModel mm = m;
    const ForwardVars fv = forward(tape, mm, ops, x, false, 0);
    for (std::size_t l = 0; l < fv.s_layers.size(); ++l) {
      const Matrixd diff = tape.value(fv.s_layers[l]) - tape.value(fv.r_layers[l]);
      CHECK(diff.cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("forward width mismatch is a dimension error") {
  const DirectedGraph g = from_edge_list(2, EdgeList{{0, 1}});
  const PropagationOperators ops = build_operators(g);
  const AgnnModel m = init_weights(node_config({3, 2}), 1);
  Tape tape;
  AgnnModel mm = m;
  CHECK_THROWS_AS(forward(tape, mm, ops, Matrixd::Ones(2, 4), false, 0), DimensionError);
}

TEST_CASE("fuse table") {
  const DirectedGraph g = from_edge_list(3, EdgeList{{0, 1}, {1, 2}});
  const PropagationOperators ops = build_operators(g);
  Rng rng(9);
  const Matrixd x = random_matrix(3, 2, rng);

  const auto fused_value = [&](Fusion f, Mode mode = Mode::Directed) {
    AgnnModel m = init_weights(node_config({2, 2}, f, mode), 21);
    Tape tape;
    ForwardVars fv = forward(tape, m, ops, x, false, 0);
    const Var out = fuse(tape, m, fv);
    return std::make_tuple(tape.value(fv.s_final).eval(), tape.value(fv.r_final).eval(),
                           tape.value(out).eval());
  };

  SUBCASE("sum, mean, max, concat shapes and algebra") {
    const auto [s, r, sum] = fused_value(Fusion::Sum);
    CHECK((sum - (r + s)).cwiseAbs().maxCoeff() == 0.0);
    const auto [s2, r2, mean] = fused_value(Fusion::Mean);
    CHECK((mean - 0.5 * (r2 + s2)).cwiseAbs().maxCoeff() == 0.0);
    const auto [s3, r3, mx] = fused_value(Fusion::Max);
    CHECK((mx - s3.cwiseMax(r3)).cwiseAbs().maxCoeff() == 0.0);
    const auto [s4, r4, cat] = fused_value(Fusion::Concat);
    CHECK(cat.cols() == s4.cols());  // node task: projection maps 2C back to C
  }

  SUBCASE("fusing equal operands") {
    // Tied weights on a symmetric operator make R == S exactly.
    const DirectedGraph sym = symmetrize(g);
    const PropagationOperators sops = build_operators(sym);
    AgnnModel m = init_weights(node_config({2, 2}, Fusion::Sum, Mode::UndirectedTied), 5);
    Tape tape;
    ForwardVars fv = forward(tape, m, sops, x, false, 0);
    const Matrixd s = tape.value(fv.s_final);
    CHECK((tape.value(fuse(tape, m, fv)) - 2.0 * s).cwiseAbs().maxCoeff() == 0.0);

    m.fusion = Fusion::Mean;
    Tape t2;
    ForwardVars fv2 = forward(t2, m, sops, x, false, 0);
    CHECK((t2.value(fuse(t2, m, fv2)) - s).cwiseAbs().maxCoeff() <= 1e-15);

    m.fusion = Fusion::Max;
    Tape t3;
    ForwardVars fv3 = forward(t3, m, sops, x, false, 0);
    CHECK((t3.value(fuse(t3, m, fv3)) - s).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("sum of opposite operands vanishes") {
    Tape tape;
    const Var a = tape.input(x);
    const Var b = tape.input((-x).eval());
    CHECK(tape.value(tape.add(a, b)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("mean equals half the sum exactly") {
    Rng rng2(33);
    const Matrixd u = random_matrix(4, 3, rng2);
    const Matrixd v = random_matrix(4, 3, rng2);
    Tape tape;
    const Var a = tape.input(u);
    const Var b = tape.input(v);
    const Matrixd sum = tape.value(tape.add(a, b));
    const Matrixd mean = tape.value(tape.scale(tape.add(a, b), 0.5));
    CHECK((mean - 0.5 * sum).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("concat fusion doubles the width when no projection applies") {
  const DirectedGraph g = from_edge_list(3, EdgeList{{0, 1}, {1, 2}});
  const PropagationOperators ops = build_operators(g);
  ModelConfig mc;
  mc.widths = {2, 4, 4};
  mc.task = Task::GraphRegression;
  mc.fusion = Fusion::Concat;
  mc.dropout = 0.0;
  AgnnModel m = init_weights(mc, 61);
  Rng rng(62);
  Tape tape;
  ForwardVars fv = forward(tape, m, ops, random_matrix(3, 2, rng), false, 0);
  const Var cat = fuse(tape, m, fv);
  CHECK(tape.value(cat).cols() == 2 * tape.value(fv.s_final).cols());

  // The other fusions preserve width.
  for (Fusion f : {Fusion::Sum, Fusion::Mean, Fusion::Max}) {
    m.fusion = f;
    Tape t;
    ForwardVars v = forward(t, m, ops, random_matrix(3, 2, rng), false, 0);
    CHECK(t.value(fuse(t, m, v)).cols() == t.value(v.s_final).cols());
  }
}

TEST_CASE("concat fusion projects 2C back to C for node classification") {
  const DirectedGraph g = from_edge_list(4, EdgeList{{0, 1}, {1, 2}, {2, 3}});
  const PropagationOperators ops = build_operators(g);
  AgnnModel m = init_weights(node_config({2, 3}, Fusion::Concat), 17);
  REQUIRE(m.concat_projection.rows() == 6);
  REQUIRE(m.concat_projection.cols() == 3);
  Rng rng(1);
  Tape tape;
  ForwardVars fv = forward(tape, m, ops, random_matrix(4, 2, rng), false, 0);
  const Var logits = fuse(tape, m, fv);
  CHECK(tape.value(logits).cols() == 3);
  CHECK(node_head(tape.value(logits), 3).rows() == 4);
}

TEST_CASE("node_head produces row-stochastic predictions") {
  const Matrixd uniform = node_head(Matrixd::Zero(1, 4), 4);
  for (Index j = 0; j < 4; ++j) CHECK(uniform(0, j) == doctest::Approx(0.25));

  Rng rng(13);
  const Matrixd logits = random_matrix(5, 3, rng, -4.0, 4.0);
  const Matrixd z = node_head(logits, 3);
  for (Index i = 0; i < 5; ++i) {
    CHECK(z.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Row-shift invariance of the argmax.
  Matrixd shifted = logits;
  shifted.row(2).array() += 123.0;
  const Matrixd z2 = node_head(shifted, 3);
  Index best1 = 0, best2 = 0;
  z.row(2).maxCoeff(&best1);
  z2.row(2).maxCoeff(&best2);
  CHECK(best1 == best2);

  CHECK_THROWS_AS(node_head(Matrixd::Zero(1, 4), 3), ConfigError);
}

TEST_CASE("graph head: zeros, permutation invariance, disjoint doubling") {
  Rng rng(19);
  ModelConfig mc;
  mc.widths = {2, 4, 4};
  mc.task = Task::GraphRegression;
  mc.dropout = 0.0;

  SUBCASE("all-zero embeddings and zero bias give zero output") {
    const DirectedGraph g = from_edge_list(3, EdgeList{{0, 1}});
    const PropagationOperators ops = build_operators(g);
    AgnnModel m = init_weights(mc, 3);
    // Zero features propagate to zero embeddings; biases are zero-initialized.
    CHECK(predict_graph(m, ops, Matrixd::Zero(3, 2)) == 0.0);
  }

  SUBCASE("permuting the node order leaves the readout unchanged") {
    const Index n = 6;
    const EdgeList edges = random_edges(n, 0.4, rng);
    const Matrixd x = random_matrix(n, 2, rng);
    const AgnnModel m = init_weights(mc, 5);

    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    EdgeList pedges;
    for (const auto& [u, v] : edges) {
      pedges.emplace_back(perm[static_cast<std::size_t>(u)],
                          perm[static_cast<std::size_t>(v)]);
    }
    Matrixd px(n, 2);
    for (Index i = 0; i < n; ++i) px.row(perm[static_cast<std::size_t>(i)]) = x.row(i);

    const double base = predict_graph(m, build_operators(from_edge_list(n, edges)), x);
    const double permuted =
        predict_graph(m, build_operators(from_edge_list(n, pedges)), px);
    CHECK(permuted == doctest::Approx(base).epsilon(1e-9));
  }

  SUBCASE("a disjoint duplicate doubles the pooled representation") {
    const Index n = 4;
    const EdgeList edges = {{0, 1}, {1, 2}, {2, 3}};
    const Matrixd x = random_matrix(n, 2, rng);
    const AgnnModel m = init_weights(mc, 7);

    EdgeList doubled = edges;
    for (const auto& [u, v] : edges) doubled.emplace_back(u + n, v + n);
    Matrixd x2(2 * n, 2);
    x2.topRows(n) = x;
    x2.bottomRows(n) = x;

    const auto pooled_of = [&](const DirectedGraph& g, const Matrixd& feats) {
      Tape tape;
      AgnnModel mm = m;
      ForwardVars fv = forward(tape, mm, build_operators(g), feats, false, 0);
      const std::size_t base_idx = 2 * mm.layers.size();
      const Var z = tape.add_row_vector(
          tape.matmul(tape.concat_cols(fv.r_final, fv.s_final), fv.params[base_idx]),
          fv.params[base_idx + 1]);
      return tape.value(tape.col_sum(z)).eval();
    };
    const Matrixd once = pooled_of(from_edge_list(n, edges), x);
    const Matrixd twice = pooled_of(from_edge_list(2 * n, doubled), x2);
    CHECK((twice - 2.0 * once).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("permutation equivariance of the forward pass") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 4 + static_cast<Index>(rng.below(10));
    const EdgeList edges = random_edges(n, 0.3, rng);
    const Matrixd x = random_matrix(n, 3, rng);
    const AgnnModel m = init_weights(node_config({3, 5, 2}), 31 + trial);

    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    EdgeList pedges;
    for (const auto& [u, v] : edges) {
      pedges.emplace_back(perm[static_cast<std::size_t>(u)],
                          perm[static_cast<std::size_t>(v)]);
    }
    Matrixd px(n, 3);
    for (Index i = 0; i < n; ++i) px.row(perm[static_cast<std::size_t>(i)]) = x.row(i);

    Tape t1, t2;
    AgnnModel m1 = m, m2 = m;
    const ForwardVars f1 =
        forward(t1, m1, build_operators(from_edge_list(n, edges)), x, false, 0);
    const ForwardVars f2 =
        forward(t2, m2, build_operators(from_edge_list(n, pedges)), px, false, 0);
    const Matrixd& s1 = t1.value(f1.s_final);
    const Matrixd& s2 = t2.value(f2.s_final);
    const Matrixd& r1 = t1.value(f1.r_final);
    const Matrixd& r2 = t2.value(f2.r_final);
    for (Index i = 0; i < n; ++i) {
      const Index pi = perm[static_cast<std::size_t>(i)];
      CHECK((s2.row(pi) - s1.row(i)).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((r2.row(pi) - r1.row(i)).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("evaluation-mode forward is bitwise deterministic") {
  Rng rng(29);
  const DirectedGraph g = from_edge_list(5, random_edges(5, 0.4, rng));
  const PropagationOperators ops = build_operators(g);
  const AgnnModel m = init_weights(node_config({3, 4, 2}, Fusion::Sum, Mode::Directed,
                                               /*dropout=*/0.5), 3);
  const Matrixd x = random_matrix(5, 3, rng);

  Tape t1, t2;
  AgnnModel m1 = m, m2 = m;
  const ForwardVars f1 = forward(t1, m1, ops, x, false, 111);
  const ForwardVars f2 = forward(t2, m2, ops, x, false, 222);  // seed unused in eval
  CHECK((t1.value(f1.s_final) - t2.value(f2.s_final)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((t1.value(f1.r_final) - t2.value(f2.r_final)).cwiseAbs().maxCoeff() == 0.0);

  // Training mode with dropout differs between seeds.
  Tape t3;
  AgnnModel m3 = m;
  const ForwardVars f3 = forward(t3, m3, ops, x, true, 111);
  CHECK((t1.value(f1.s_final) - t3.value(f3.s_final)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "agnn_ckpt_test";
  fs::create_directories(dir);

  SUBCASE("node model with concat projection") {
    const AgnnModel m = init_weights(node_config({7, 5, 3}, Fusion::Concat,
                                                 Mode::Directed, 0.5), 12345);
    const std::string path = (dir / "node.ckpt").string();
    save_model(path, m);
    const AgnnModel back = load_model(path);
    CHECK(back.fusion == m.fusion);
    CHECK(back.mode == m.mode);
    CHECK(back.task == m.task);
    CHECK(back.dropout == m.dropout);
    REQUIRE(back.widths == m.widths);
    const auto pa = m.parameters();
    const auto pb = back.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      REQUIRE(pa[i]->rows() == pb[i]->rows());
      REQUIRE(pa[i]->cols() == pb[i]->cols());
      CHECK((*pa[i] - *pb[i]).cwiseAbs().maxCoeff() == 0.0);  // bit-exact
    }
  }

  SUBCASE("tied graph-regression model") {
    ModelConfig mc;
    mc.widths = {3, 6, 6};
    mc.mode = Mode::UndirectedTied;
    mc.task = Task::GraphRegression;
    mc.dropout = 0.25;
    const AgnnModel m = init_weights(mc, 999);
    const std::string path = (dir / "graph.ckpt").string();
    save_model(path, m);
    const AgnnModel back = load_model(path);
    const auto pa = m.parameters();
    const auto pb = back.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK((*pa[i] - *pb[i]).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("corrupt checkpoints are rejected") {
    const std::string path = (dir / "bad.ckpt").string();
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("not a checkpoint\n", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_model(path), InputError);
    CHECK_THROWS_AS(load_model((dir / "missing.ckpt").string()), InputError);
  }
}
