#include "agnn/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "agnn/error.hpp"
#include "agnn/linalg.hpp"
#include "agnn/rng.hpp"

namespace agnn {

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::Sum: return "sum";
    case Fusion::Max: return "max";
    case Fusion::Mean: return "mean";
    case Fusion::Concat: return "concat";
  }
  return "sum";
}

std::string to_string(Mode m) {
  return m == Mode::Directed ? "directed" : "undirected-tied";
}

std::string to_string(Task t) {
  return t == Task::NodeClassification ? "node-classification" : "graph-regression";
}

Fusion fusion_from_string(const std::string& s) {
  if (s == "sum") return Fusion::Sum;
  if (s == "max") return Fusion::Max;
  if (s == "mean") return Fusion::Mean;
  if (s == "concat") return Fusion::Concat;
  throw ConfigError("unknown fusion tag '" + s + "' (sum|max|mean|concat)");
}

Mode mode_from_string(const std::string& s) {
  if (s == "directed") return Mode::Directed;
  if (s == "undirected-tied" || s == "undirected") return Mode::UndirectedTied;
  throw ConfigError("unknown mode tag '" + s + "' (directed|undirected-tied)");
}

std::vector<Matrixd*> AgnnModel::parameters() {
  std::vector<Matrixd*> out;
  for (LayerWeights& lw : layers) {
    out.push_back(&lw.w1);
    if (!tied()) out.push_back(&lw.w2);
  }
  if (concat_projection.size() != 0) out.push_back(&concat_projection);
  if (task == Task::GraphRegression) {
    out.push_back(&fc_w);
    out.push_back(&fc_b);
    out.push_back(&out_w);
    out.push_back(&out_b);
  }
  return out;
}

std::vector<const Matrixd*> AgnnModel::parameters() const {
  auto mut = const_cast<AgnnModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> AgnnModel::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.push_back("w1." + std::to_string(l));
    if (!tied()) out.push_back("w2." + std::to_string(l));
  }
  if (concat_projection.size() != 0) out.push_back("concat_projection");
  if (task == Task::GraphRegression) {
    out.insert(out.end(), {"fc_w", "fc_b", "out_w", "out_b"});
  }
  return out;
}

namespace {

Matrixd glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrixd w(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      w(i, j) = rng.uniform(-bound, bound);
    }
  }
  return w;
}

}  // namespace

AgnnModel init_weights(const ModelConfig& config, std::uint64_t seed) {
  if (config.widths.size() < 2) {
    throw ConfigError("init_weights: need at least input and output widths");
  }
  for (Index w : config.widths) {
    if (w <= 0) throw ConfigError("init_weights: zero width");
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ConfigError("init_weights: dropout must be in [0, 1)");
  }

  AgnnModel m;
  m.widths = config.widths;
  m.fusion = config.fusion;
  m.mode = config.mode;
  m.task = config.task;
  m.dropout = config.dropout;

  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < config.widths.size(); ++l) {
    LayerWeights lw;
    lw.w1 = glorot_uniform(config.widths[l], config.widths[l + 1], rng);
    if (m.mode == Mode::Directed) {
      lw.w2 = glorot_uniform(config.widths[l], config.widths[l + 1], rng);
    }
    m.layers.push_back(std::move(lw));
  }
  const Index out = m.output_dim();
  if (m.task == Task::NodeClassification && m.fusion == Fusion::Concat) {
    m.concat_projection = glorot_uniform(2 * out, out, rng);
  }
  if (m.task == Task::GraphRegression) {
    m.fc_w = glorot_uniform(2 * out, out, rng);
    m.fc_b = Matrixd::Zero(1, out);
    m.out_w = glorot_uniform(out, 1, rng);
    m.out_b = Matrixd::Zero(1, 1);
  }
  return m;
}

ForwardVars forward(Tape& tape, const AgnnModel& model, const PropagationOperators& ops,
                    const Matrixd& features, bool training, std::uint64_t dropout_seed) {
  if (features.cols() != model.feature_dim()) {
    throw DimensionError("forward: feature width " + std::to_string(features.cols()) +
                         " does not match first layer width " +
                         std::to_string(model.feature_dim()));
  }
  if (ops.a_tilde.rows() != features.rows()) {
    throw DimensionError("forward: operator size does not match feature rows");
  }

  ForwardVars fv;
  auto params = model.parameters();
  fv.params.reserve(params.size());
  for (const Matrixd* p : params) {
    fv.params.push_back(tape.input(*p, /*trainable=*/true));
  }

  // Parameter vars per layer, honoring the tied-weight layout.
  const auto w1_var = [&](Index l) {
    return fv.params[static_cast<std::size_t>(model.tied() ? l : 2 * l)];
  };
  const auto w2_var = [&](Index l) {
    return model.tied() ? w1_var(l) : fv.params[static_cast<std::size_t>(2 * l + 1)];
  };

  const Var x = tape.constant(features);
  Var s = x;
  Var r = x;
  const Index L = model.num_layers();
  const bool drop = training && model.dropout > 0.0;
  for (Index l = 0; l < L; ++l) {
    if (drop) {
      const std::uint64_t seed_s = mix_seed(dropout_seed, static_cast<std::uint64_t>(l), 0);
      const std::uint64_t seed_r =
          model.tied() ? seed_s : mix_seed(dropout_seed, static_cast<std::uint64_t>(l), 1);
      s = tape.dropout(s, model.dropout, seed_s);
      r = tape.dropout(r, model.dropout, seed_r);
    }
    // Aggregate first (mean over predecessors/successors via the normalized
    // operators), then transform: matches the aggregate/combine reading.
    const Var s_msg = tape.spmm(ops.a_tilde, s);
    const Var r_msg = tape.spmm(ops.a_hat, r);
    s = tape.matmul(s_msg, w1_var(l));
    r = tape.matmul(r_msg, w2_var(l));
    if (l + 1 < L) {  // identity on the final layer; heads consume logits
      s = tape.relu(s);
      r = tape.relu(r);
    }
    fv.s_messages.push_back(s_msg);
    fv.r_messages.push_back(r_msg);
    fv.s_layers.push_back(s);
    fv.r_layers.push_back(r);
  }
  fv.s_final = s;
  fv.r_final = r;
  return fv;
}

Var fuse(Tape& tape, const AgnnModel& model, ForwardVars& fv) {
  switch (model.fusion) {
    case Fusion::Sum:
      return tape.add(fv.r_final, fv.s_final);
    case Fusion::Mean:
      return tape.scale(tape.add(fv.r_final, fv.s_final), 0.5);
    case Fusion::Max:
      return tape.maximum(fv.s_final, fv.r_final);
    case Fusion::Concat: {
      const Var cat = tape.concat_cols(fv.r_final, fv.s_final);
      if (model.task == Task::NodeClassification) {
        const std::size_t proj = model.tied() ? model.layers.size()
                                              : 2 * model.layers.size();
        return tape.matmul(cat, fv.params[proj]);
      }
      return cat;
    }
  }
  throw ConfigError("fuse: unknown fusion tag");
}

Matrixd node_head(const Matrixd& fused_logits, Index num_classes) {
  if (fused_logits.cols() != num_classes) {
    throw ConfigError("node_head: fused width " + std::to_string(fused_logits.cols()) +
                      " != class count " + std::to_string(num_classes));
  }
  return row_softmax(fused_logits);
}

Var graph_head(Tape& tape, const AgnnModel& model, ForwardVars& fv) {
  if (model.task != Task::GraphRegression) {
    throw ConfigError("graph_head: model has no graph head");
  }
  const std::size_t base = (model.tied() ? 1 : 2) * model.layers.size();
  const Var fc_w = fv.params[base];
  const Var fc_b = fv.params[base + 1];
  const Var out_w = fv.params[base + 2];
  const Var out_b = fv.params[base + 3];

  const Var cat = tape.concat_cols(fv.r_final, fv.s_final);
  const Var z = tape.add_row_vector(tape.matmul(cat, fc_w), fc_b);
  const Var pooled = tape.col_sum(z);  // permutation-invariant readout
  return tape.add(tape.matmul(pooled, out_w), out_b);
}

Matrixd predict_probabilities(const AgnnModel& model, const PropagationOperators& ops,
                              const Matrixd& features) {
  Tape tape;
  ForwardVars fv = forward(tape, model, ops, features, /*training=*/false, 0);
  const Var logits = fuse(tape, model, fv);
  return node_head(tape.value(logits), model.output_dim());
}

double predict_graph(const AgnnModel& model, const PropagationOperators& ops,
                     const Matrixd& features) {
  Tape tape;
  ForwardVars fv = forward(tape, model, ops, features, /*training=*/false, 0);
  return tape.value(graph_head(tape, model, fv))(0, 0);
}

// ---------------------------------------------------------------------------
// Checkpoint format: line-oriented text, hexfloat payload (bit-exact).
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kMagic = "agnn-checkpoint";
constexpr int kFormatVersion = 1;

void write_tensor(std::ostream& out, const std::string& name, const Matrixd& m) {
  out << "tensor " << name << " " << m.rows() << " " << m.cols() << "\n";
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%a", m(i, j));
      out << buf << (j + 1 == m.cols() ? "" : " ");
    }
    out << "\n";
  }
}

double parse_hexfloat(const std::string& tok, const std::string& path) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw InputError(path + ": bad float token '" + tok + "'");
  }
  return v;
}

Matrixd read_tensor(std::istream& in, Index rows, Index cols, const std::string& path) {
  Matrixd m(rows, cols);
  std::string tok;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (!(in >> tok)) {
        throw InputError(path + ": truncated tensor payload");
      }
      m(i, j) = parse_hexfloat(tok, path);
    }
  }
  return m;
}

}  // namespace

void save_model(const std::string& path, const AgnnModel& model) {
  std::ofstream out(path);
  if (!out) throw InputError("save_model: cannot open '" + path + "'");
  out << kMagic << " " << kFormatVersion << "\n";
  out << "mode " << to_string(model.mode) << "\n";
  out << "fusion " << to_string(model.fusion) << "\n";
  out << "task " << to_string(model.task) << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", model.dropout);
  out << "dropout " << buf << "\n";
  out << "widths " << model.widths.size();
  for (Index w : model.widths) out << " " << w;
  out << "\n";
  const auto params = model.parameters();
  const auto names = model.parameter_names();
  out << "tensors " << params.size() << "\n";
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_tensor(out, names[i], *params[i]);
  }
  out << "end\n";
  if (!out) throw InputError("save_model: write failed for '" + path + "'");
}

AgnnModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("load_model: cannot open '" + path + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic || version != kFormatVersion) {
    throw InputError("load_model: '" + path + "' is not a version-" +
                     std::to_string(kFormatVersion) + " checkpoint");
  }
  std::string key, val;

  AgnnModel m;
  in >> key >> val;
  if (key != "mode") throw InputError(path + ": expected mode");
  m.mode = mode_from_string(val);
  in >> key >> val;
  if (key != "fusion") throw InputError(path + ": expected fusion");
  m.fusion = fusion_from_string(val);
  in >> key >> val;
  if (key != "task") throw InputError(path + ": expected task");
  if (val == "node-classification") {
    m.task = Task::NodeClassification;
  } else if (val == "graph-regression") {
    m.task = Task::GraphRegression;
  } else {
    throw InputError(path + ": unknown task '" + val + "'");
  }
  in >> key >> val;
  if (key != "dropout") throw InputError(path + ": expected dropout");
  m.dropout = parse_hexfloat(val, path);

  std::size_t width_count = 0;
  in >> key >> width_count;
  if (key != "widths") throw InputError(path + ": expected widths");
  m.widths.resize(width_count);
  for (auto& w : m.widths) in >> w;

  std::size_t tensor_count = 0;
  in >> key >> tensor_count;
  if (key != "tensors") throw InputError(path + ": expected tensors");

  // Allocate the layer/head slots, then fill them in canonical order.
  const std::size_t num_layers = width_count - 1;
  m.layers.resize(num_layers);
  if (m.task == Task::NodeClassification && m.fusion == Fusion::Concat) {
    m.concat_projection.resize(1, 1);  // placeholder; overwritten below
  }
  if (m.task == Task::GraphRegression) {
    m.fc_w.resize(1, 1);
    m.fc_b.resize(1, 1);
    m.out_w.resize(1, 1);
    m.out_b.resize(1, 1);
  }
  auto slots = m.parameters();
  const auto names = m.parameter_names();
  if (slots.size() != tensor_count) {
    throw InputError(path + ": tensor count " + std::to_string(tensor_count) +
                     " does not match model layout (" + std::to_string(slots.size()) + ")");
  }
  for (std::size_t i = 0; i < tensor_count; ++i) {
    std::string name;
    Index rows = 0, cols = 0;
    in >> key >> name >> rows >> cols;
    if (key != "tensor" || name != names[i]) {
      throw InputError(path + ": expected tensor " + names[i]);
    }
    *slots[i] = read_tensor(in, rows, cols, path);
  }
  in >> key;
  if (key != "end") throw InputError(path + ": missing end marker");
  return m;
}

}  // namespace agnn
