#include "agnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "agnn/error.hpp"
#include "agnn/rng.hpp"

namespace fs = std::filesystem;

namespace agnn {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no,
                             const std::string& what) {
  throw InputError(path + ":" + std::to_string(line_no) + ": " + what);
}

struct EdgeFile {
  EdgeList edges;
  Index max_id = -1;
  std::optional<Index> header_n;
};

EdgeFile read_edge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open edge file '" + path + "'");
  EdgeFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line);
      std::string tag;
      hs >> tag;
      if (tag == "#nodes") {
        Index n = -1;
        if (!(hs >> n) || n <= 0) parse_fail(path, line_no, "bad '#nodes' header");
        out.header_n = n;
      }
      continue;
    }
    std::istringstream ls(line);
    Index u = -1, v = -1;
    if (!(ls >> u >> v) || u < 0 || v < 0) {
      parse_fail(path, line_no, "expected 'source<TAB>target'");
    }
    std::string extra;
    if (ls >> extra) parse_fail(path, line_no, "trailing tokens after edge");
    out.edges.emplace_back(u, v);
    out.max_id = std::max({out.max_id, u, v});
  }
  return out;
}

Index resolve_node_count(const EdgeFile& ef, const std::string& path) {
  const Index inferred = ef.max_id + 1;
  if (ef.header_n) {
    if (*ef.header_n < inferred) {
      throw InputError(path + ": header declares " + std::to_string(*ef.header_n) +
                       " nodes but edges reference id " + std::to_string(ef.max_id));
    }
    return *ef.header_n;
  }
  if (inferred <= 0) throw InputError(path + ": no edges and no '#nodes' header");
  return inferred;
}

}  // namespace

DatasetBundle load_edge_list_dataset(const std::string& edges_path,
                                     const std::optional<std::string>& features_path,
                                     const std::string& labels_path) {
  const EdgeFile ef = read_edge_file(edges_path);
  const Index n = resolve_node_count(ef, edges_path);

  DatasetBundle bundle;
  bundle.graph = from_edge_list(n, ef.edges);
  bundle.name = fs::path(edges_path).stem().string();
  bundle.task = Task::NodeClassification;

  // Features: dense file or the one-hot identity.
  if (features_path) {
    std::ifstream in(*features_path);
    if (!in) throw InputError("cannot open feature file '" + *features_path + "'");
    std::string line;
    std::size_t line_no = 0;
    Index dim = -1;
    Matrixd feats;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      Index id = -1;
      std::string values;
      if (!(ls >> id >> values)) {
        parse_fail(*features_path, line_no, "expected 'id<TAB>v1,v2,...'");
      }
      if (id < 0 || id >= n) {
        parse_fail(*features_path, line_no,
                   "node id " + std::to_string(id) + " out of range (n=" +
                       std::to_string(n) + ")");
      }
      std::vector<double> row;
      std::istringstream vs(values);
      std::string tok;
      while (std::getline(vs, tok, ',')) {
        try {
          std::size_t used = 0;
          row.push_back(std::stod(tok, &used));
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          parse_fail(*features_path, line_no, "bad feature value '" + tok + "'");
        }
      }
      if (row.empty()) parse_fail(*features_path, line_no, "empty feature vector");
      if (dim < 0) {
        dim = static_cast<Index>(row.size());
        feats = Matrixd::Zero(n, dim);
      } else if (static_cast<Index>(row.size()) != dim) {
        parse_fail(*features_path, line_no, "feature width changed mid-file");
      }
      for (Index j = 0; j < dim; ++j) feats(id, j) = row[static_cast<std::size_t>(j)];
    }
    if (dim < 0) throw InputError(*features_path + ": empty feature file");
    bundle.features = std::move(feats);
  } else {
    bundle.features = one_hot_features(bundle.graph);
  }

  // Labels.
  {
    std::ifstream in(labels_path);
    if (!in) throw InputError("cannot open label file '" + labels_path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      Index id = -1, cls = -1;
      if (!(ls >> id >> cls) || cls < 0) {
        parse_fail(labels_path, line_no, "expected 'id<TAB>class'");
      }
      if (id < 0 || id >= n) {
        parse_fail(labels_path, line_no,
                   "node id " + std::to_string(id) + " out of range (n=" +
                       std::to_string(n) + ")");
      }
      bundle.labels.indices.push_back(id);
      bundle.labels.labels.push_back(cls);
      bundle.labels.num_classes = std::max(bundle.labels.num_classes, cls + 1);
    }
    if (bundle.labels.indices.empty()) {
      throw InputError(labels_path + ": empty label file");
    }
  }
  return bundle;
}

DatasetBundle generate_directed_sbm(const SbmSpec& spec) {
  const Index blocks = static_cast<Index>(spec.block_sizes.size());
  if (blocks == 0) throw ConfigError("sbm: need at least one block");
  if (spec.pi.rows() != blocks || spec.pi.cols() != blocks) {
    throw ConfigError("sbm: pi must be blocks x blocks");
  }
  if ((spec.pi.array() < 0.0).any() || (spec.pi.array() > 1.0).any()) {
    throw ConfigError("sbm: probabilities must lie in [0, 1]");
  }

  Index n = 0;
  std::vector<Index> block_of;
  std::vector<Index> block_start(static_cast<std::size_t>(blocks));
  for (Index b = 0; b < blocks; ++b) {
    block_start[static_cast<std::size_t>(b)] = n;
    const Index size = spec.block_sizes[static_cast<std::size_t>(b)];
    if (size <= 0) throw ConfigError("sbm: block sizes must be positive");
    for (Index i = 0; i < size; ++i) block_of.push_back(b);
    n += size;
  }

  // Geometric skipping over each block-pair rectangle: for Bernoulli(p)
  // streams the index of the next success is current + 1 + Geom(p).
  EdgeList edges;
  Rng rng(spec.seed);
  for (Index bu = 0; bu < blocks; ++bu) {
    for (Index bv = 0; bv < blocks; ++bv) {
      const double p = spec.pi(bu, bv);
      if (p <= 0.0) continue;
      const Index rows = spec.block_sizes[static_cast<std::size_t>(bu)];
      const Index cols = spec.block_sizes[static_cast<std::size_t>(bv)];
      const Index u0 = block_start[static_cast<std::size_t>(bu)];
      const Index v0 = block_start[static_cast<std::size_t>(bv)];
      const double total = static_cast<double>(rows) * static_cast<double>(cols);
      if (p >= 1.0) {
        for (Index i = 0; i < rows; ++i) {
          for (Index j = 0; j < cols; ++j) {
            if (u0 + i != v0 + j) edges.emplace_back(u0 + i, v0 + j);
          }
        }
        continue;
      }
      const double log1mp = std::log1p(-p);
      double idx = -1.0;
      while (true) {
        // Geometric gap; uniform() < 1 keeps the log argument positive.
        idx += 1.0 + std::floor(std::log1p(-rng.uniform()) / log1mp);
        if (idx >= total) break;
        const auto flat = static_cast<Index>(idx);
        const Index u = u0 + flat / cols;
        const Index v = v0 + flat % cols;
        if (u != v) edges.emplace_back(u, v);  // no self-loops generated
      }
    }
  }

  DatasetBundle bundle;
  bundle.graph = from_edge_list(n, edges);
  bundle.features = one_hot_features(bundle.graph);
  bundle.labels.num_classes = blocks;
  for (Index v = 0; v < n; ++v) {
    bundle.labels.indices.push_back(v);
    bundle.labels.labels.push_back(block_of[static_cast<std::size_t>(v)]);
  }
  bundle.task = Task::NodeClassification;
  bundle.name = "sbm";
  return bundle;
}

Matrixd dag_node_features(const DirectedGraph& g) {
  Matrixd feats(g.n, 3);
  const double inv_n = 1.0 / static_cast<double>(g.n);
  for (Index v = 0; v < g.n; ++v) {
    feats(v, 0) = 1.0;
    feats(v, 1) = g.out_degree[v] * inv_n;
    feats(v, 2) = g.in_degree[v] * inv_n;
  }
  return feats;
}

Index longest_path_length(const DirectedGraph& g) {
  // Kahn topological order, then DP. Throws on cycles.
  std::vector<Index> indeg(static_cast<std::size_t>(g.n), 0);
  std::vector<std::vector<Index>> succ(static_cast<std::size_t>(g.n));
  for (const auto& [u, v] : g.edges) {
    succ[static_cast<std::size_t>(u)].push_back(v);
    indeg[static_cast<std::size_t>(v)] += 1;
  }
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(g.n));
  for (Index v = 0; v < g.n; ++v) {
    if (indeg[static_cast<std::size_t>(v)] == 0) order.push_back(v);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (Index w : succ[static_cast<std::size_t>(order[head])]) {
      if (--indeg[static_cast<std::size_t>(w)] == 0) order.push_back(w);
    }
  }
  if (order.size() != static_cast<std::size_t>(g.n)) {
    throw ContractError("longest_path_length: graph has a cycle");
  }
  std::vector<Index> dist(static_cast<std::size_t>(g.n), 0);
  Index best = 0;
  for (Index u : order) {
    for (Index w : succ[static_cast<std::size_t>(u)]) {
      dist[static_cast<std::size_t>(w)] =
          std::max(dist[static_cast<std::size_t>(w)], dist[static_cast<std::size_t>(u)] + 1);
      best = std::max(best, dist[static_cast<std::size_t>(w)]);
    }
  }
  return best;
}

std::vector<GraphSample> generate_dag_regression(const DagSpec& spec) {
  if (spec.count <= 0) throw ConfigError("dag: count must be positive");
  if (spec.min_size < 2 || spec.max_size < spec.min_size) {
    throw ConfigError("dag: sizes must satisfy 2 <= min <= max");
  }
  if (spec.edge_prob < 0.0 || spec.edge_prob > 1.0) {
    throw ConfigError("dag: edge probability must lie in [0, 1]");
  }

  std::vector<GraphSample> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int g = 0; g < spec.count; ++g) {
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(g)));
    const Index n = spec.min_size +
                    static_cast<Index>(rng.below(
                        static_cast<std::uint64_t>(spec.max_size - spec.min_size + 1)));
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);

    EdgeList edges;
    for (Index a = 0; a < n; ++a) {
      for (Index b = a + 1; b < n; ++b) {
        if (rng.bernoulli(spec.edge_prob)) {
          // Edge follows the topological order: earlier -> later.
          edges.emplace_back(order[static_cast<std::size_t>(a)],
                             order[static_cast<std::size_t>(b)]);
        }
      }
    }

    GraphSample sample;
    sample.graph = from_edge_list(n, edges);
    sample.ops = build_operators(sample.graph);
    sample.features = dag_node_features(sample.graph);
    sample.target = static_cast<double>(longest_path_length(sample.graph)) /
                    static_cast<double>(n - 1);
    out.push_back(std::move(sample));
  }
  return out;
}

void write_edge_file(const std::string& path, const DirectedGraph& g) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write edge file '" + path + "'");
  out << "#nodes " << g.n << "\n";
  for (const auto& [u, v] : g.edges) out << u << "\t" << v << "\n";
  if (!out) throw InputError("write failed for '" + path + "'");
}

void write_label_file(const std::string& path, const LabelSet& labels) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write label file '" + path + "'");
  for (std::size_t k = 0; k < labels.indices.size(); ++k) {
    out << labels.indices[k] << "\t" << labels.labels[k] << "\n";
  }
  if (!out) throw InputError("write failed for '" + path + "'");
}

void write_feature_file(const std::string& path, const Matrixd& features) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write feature file '" + path + "'");
  char buf[64];
  for (Index i = 0; i < features.rows(); ++i) {
    out << i << "\t";
    for (Index j = 0; j < features.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", features(i, j));
      out << buf << (j + 1 == features.cols() ? "" : ",");
    }
    out << "\n";
  }
  if (!out) throw InputError("write failed for '" + path + "'");
}

std::string write_graph_set(const std::string& dir, const std::string& stem,
                            const std::vector<GraphSample>& samples) {
  fs::create_directories(dir);
  const std::string manifest = (fs::path(dir) / (stem + "_manifest.tsv")).string();
  std::ofstream out(manifest);
  if (!out) throw InputError("cannot write manifest '" + manifest + "'");
  char buf[64];
  for (std::size_t g = 0; g < samples.size(); ++g) {
    const std::string edge_name = stem + "_" + std::to_string(g) + ".edges";
    write_edge_file((fs::path(dir) / edge_name).string(), samples[g].graph);
    std::snprintf(buf, sizeof(buf), "%.17g", samples[g].target);
    out << edge_name << "\t" << buf << "\n";
  }
  if (!out) throw InputError("write failed for '" + manifest + "'");
  return manifest;
}

std::vector<GraphSample> load_graph_set(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw InputError("cannot open manifest '" + manifest_path + "'");
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<GraphSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string rel;
    double target = 0.0;
    if (!(ls >> rel >> target)) {
      parse_fail(manifest_path, line_no, "expected 'edge_file<TAB>target'");
    }
    const EdgeFile ef = read_edge_file((base / rel).string());
    GraphSample sample;
    sample.graph = from_edge_list(resolve_node_count(ef, rel), ef.edges);
    sample.ops = build_operators(sample.graph);
    sample.features = dag_node_features(sample.graph);
    sample.target = target;
    out.push_back(std::move(sample));
  }
  if (out.empty()) throw InputError(manifest_path + ": empty manifest");
  return out;
}

}  // namespace agnn
