#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "orbitlift/error.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/linalg.hpp"
#include "orbitlift/refinement.hpp"
#include "orbitlift/rng.hpp"
#include "orbitlift/symmetry.hpp"

namespace orbitlift {

using Vector = std::vector<double>;

enum class NodeEmbeddingKind { svd, factorization, one_hot, wl_histogram };

inline const char* to_string(NodeEmbeddingKind k) {
  switch (k) {
    case NodeEmbeddingKind::svd: return "svd";
    case NodeEmbeddingKind::factorization: return "factorization";
    case NodeEmbeddingKind::one_hot: return "one_hot";
    case NodeEmbeddingKind::wl_histogram: return "wl_histogram";
  }
  return "?";
}

struct NodeEmbeddingTable {
  NodeEmbeddingKind kind = NodeEmbeddingKind::one_hot;
  std::vector<Vector> rows;
  std::vector<std::uint64_t> colors;  // WL colour per node (wl_histogram only)

  std::size_t size() const { return rows.size(); }
  std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }
};

/// Numeric adjacency through the alphabet's code -> real cast.
inline Matrix numeric_adjacency(const ObservedGraph& g) {
  Matrix a(g.size(), g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) a(i, j) = g.numeric(i, j);
  }
  return a;
}

// ---------------------------------------------------------------------------
// SVD

/// Row i is [sigma_k v_ik for k < r] followed by [sigma_k u_ik for k < r].
inline NodeEmbeddingTable svd_embed(const ObservedGraph& g, std::size_t rank) {
  const auto n = g.size();
  if (rank == 0 || rank > n) throw Error("SVD rank must be in [1, n]");
  const auto s = svd(numeric_adjacency(g));
  NodeEmbeddingTable t;
  t.kind = NodeEmbeddingKind::svd;
  t.rows.assign(n, Vector(2 * rank));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < rank; ++k) {
      t.rows[i][k] = s.singular_values[k] * s.right(i, k);
      t.rows[i][rank + k] = s.singular_values[k] * s.left(i, k);
    }
  }
  return t;
}

struct SvdInvarianceReport {
  std::vector<NodePair> equal_pairs;      // spectral test says equal
  std::vector<NodePair> predicate_pairs;  // isomorphic and same neighbourhood
  std::vector<NodePair> disagreements;

  bool agrees() const { return disagreements.empty(); }
};

/// Basis-free equality of full SVD embeddings: nodes i and j coincide iff
/// P e_i = P e_j for every eigenspace projector P of a^T a and a a^T with a
/// positive eigenvalue. The result is cross-checked against "same node orbit
/// and identical in- and out-neighbourhoods".
inline SvdInvarianceReport svd_invariance_check(const ObservedGraph& g, double tolerance = 1e-7) {
  const auto n = g.size();
  const auto s = svd(numeric_adjacency(g));
  auto projectors = eigenspace_projectors(s.gram_right, 1e-9);
  for (auto& p : eigenspace_projectors(s.gram_left, 1e-9)) projectors.push_back(std::move(p));
  const auto partition = orbits(g);

  SvdInvarianceReport r;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      bool spectral = true;
      for (const auto& p : projectors) {
        for (std::size_t k = 0; k < n && spectral; ++k) spectral = std::abs(p(k, i) - p(k, j)) <= tolerance;
        if (!spectral) break;
      }
      bool predicate = partition.node_orbit[i] == partition.node_orbit[j];
      for (std::size_t v = 0; v < n && predicate; ++v) {
        predicate = g.at(i, v) == g.at(j, v) && g.at(v, i) == g.at(v, j);
      }
      if (spectral) r.equal_pairs.push_back({i, j});
      if (predicate) r.predicate_pairs.push_back({i, j});
      if (spectral != predicate) r.disagreements.push_back({i, j});
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Weisfeiler-Lehman

inline constexpr std::size_t kDefaultHashDim = 64;

/// Adds a signed hashed indicator of `color` to out[offset, offset + dim):
/// three positions, each with a hash-derived sign.
inline void add_hashed(Vector& out, std::size_t offset, std::size_t dim, std::uint64_t color, double weight = 1.0) {
  std::uint64_t h = color;
  for (int probe = 0; probe < 3; ++probe) {
    h = splitmix64(h + 0x9e3779b97f4a7c15ULL);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    out[offset + (h % dim)] += sign * weight;
  }
}

inline std::uint64_t label_hash(EdgeValue label, std::uint64_t mark = 0) {
  return hash_combine(hash_combine(0x6a09e667f3bcc908ULL, label), mark);
}

/// 1-WL colours over the value-labelled graph, starting from node
/// attributes. `iterations < 0` refines until the partition is stable.
inline NodeEmbeddingTable wl_node_colors(const ObservedGraph& g, int iterations = -1,
                                         std::size_t dim = kDefaultHashDim) {
  const AdjacencyView view(g);
  std::vector<std::uint64_t> initial(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) initial[v] = label_hash(view.label(v));
  NodeEmbeddingTable t;
  t.kind = NodeEmbeddingKind::wl_histogram;
  t.colors = wl_hash_rounds(view, std::move(initial), iterations).back();
  t.rows.assign(g.size(), Vector(dim, 0.0));
  for (std::size_t v = 0; v < g.size(); ++v) add_hashed(t.rows[v], 0, dim, t.colors[v]);
  return t;
}

/// Distance buckets {1, 2, 3, >=4, unreachable}; distance 0 (diagonal pair)
/// leaves the block empty.
inline constexpr std::size_t kDistanceBuckets = 5;

inline std::size_t distance_bucket(std::size_t d) {
  if (d == static_cast<std::size_t>(-1)) return 4;
  return std::min<std::size_t>(d, 4) - 1;
}

enum class Pooling { sum, mean };

struct LabeledWlOptions {
  int iterations = 3;
  Pooling pooling = Pooling::mean;
  std::size_t dim = kDefaultHashDim;
  /// Restrict refinement to the connected components of the two endpoints.
  bool component_scope = true;
};

/// Labeling-trick pair encoder. Marks the endpoints, refines, and pools
/// [all colours | colour of i | colour of j | distance bucket].
class LabeledWl {
 public:
  LabeledWl(const ObservedGraph& g, LabeledWlOptions options = {}) : options_(options), view_(g) {
    if (options_.dim == 0) throw Error("hash dimension must be positive");
    const auto n = g.size();
    component_.assign(n, static_cast<std::size_t>(-1));
    for (std::size_t s = 0; s < n; ++s) {
      if (component_[s] != static_cast<std::size_t>(-1)) continue;
      const auto id = members_.size();
      members_.emplace_back();
      std::vector<std::size_t> queue{s};
      component_[s] = id;
      for (std::size_t head = 0; head < queue.size(); ++head) {
        members_[id].push_back(queue[head]);
        for (const auto& nb : view_.neighbors(queue[head])) {
          if (component_[nb.node] == static_cast<std::size_t>(-1)) {
            component_[nb.node] = id;
            queue.push_back(nb.node);
          }
        }
      }
    }
  }

  std::size_t dim() const { return 3 * options_.dim + kDistanceBuckets; }

  Vector operator()(std::size_t i, std::size_t j) const {
    if (i >= view_.size() || j >= view_.size()) throw Error("pair out of range");
    std::vector<std::size_t> nodes;
    if (options_.component_scope) {
      nodes = members_[component_[i]];
      if (component_[j] != component_[i]) {
        nodes.insert(nodes.end(), members_[component_[j]].begin(), members_[component_[j]].end());
      }
    } else {
      nodes.resize(view_.size());
      for (std::size_t v = 0; v < nodes.size(); ++v) nodes[v] = v;
    }
    const auto sub = view_.induced(nodes);
    std::size_t li = 0, lj = 0;
    std::vector<std::uint64_t> initial(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const std::uint64_t mark = (nodes[k] == i ? 1u : 0u) | (nodes[k] == j ? 2u : 0u);
      if (nodes[k] == i) li = k;
      if (nodes[k] == j) lj = k;
      initial[k] = label_hash(sub.label(k), mark);
    }
    const auto colors = wl_hash_rounds(sub, std::move(initial), options_.iterations).back();
    const auto d = options_.dim;
    Vector out(dim(), 0.0);
    const double w = options_.pooling == Pooling::mean ? 1.0 / static_cast<double>(nodes.size()) : 1.0;
    for (auto c : colors) add_hashed(out, 0, d, c, w);
    add_hashed(out, d, d, colors[li]);
    add_hashed(out, 2 * d, d, colors[lj]);
    if (i != j) out[3 * d + distance_bucket(sub.distances_from(li)[lj])] = 1.0;
    return out;
  }

 private:
  LabeledWlOptions options_;
  AdjacencyView view_;
  std::vector<std::size_t> component_;
  std::vector<std::vector<std::size_t>> members_;
};

inline Vector pairwise_labeled_wl(const ObservedGraph& g, NodePair pair, LabeledWlOptions options = {}) {
  return LabeledWl(g, options)(pair.first, pair.second);
}

/// Hand-built joint pair descriptors, all invariant under relabelling:
/// value codes of (i,j) and (j,i) as one-hot and numeric, distance bucket,
/// weighted out/in degrees, common neighbours, weighted 2-paths, endpoint
/// attributes, diagonal flag.
class JointFeatures {
 public:
  explicit JointFeatures(const ObservedGraph& g) : g_(g), a_(numeric_adjacency(g)), view_(g) {
    const auto n = g.size();
    out_degree_.assign(n, 0.0);
    in_degree_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        out_degree_[i] += a_(i, j);
        in_degree_[j] += a_(i, j);
      }
    }
  }

  std::size_t dim() const { return 2 * g_.alphabet().size() + 2 + kDistanceBuckets + 4 + 2 + 2 + 1; }

  Vector operator()(std::size_t i, std::size_t j) const {
    const auto n = g_.size();
    if (i >= n || j >= n) throw Error("pair out of range");
    const auto k = g_.alphabet().size();
    Vector out(dim(), 0.0);
    std::size_t o = 0;
    out[o + g_.at(i, j)] = 1.0;
    out[o + k + g_.at(j, i)] = 1.0;
    o += 2 * k;
    out[o++] = a_(i, j);
    out[o++] = a_(j, i);
    if (i != j) out[o + distance_bucket(view_.distances_from(i)[j])] = 1.0;
    o += kDistanceBuckets;
    out[o++] = out_degree_[i];
    out[o++] = in_degree_[i];
    out[o++] = out_degree_[j];
    out[o++] = in_degree_[j];
    double common = 0, paths = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (v == i || v == j) continue;
      const bool ni = g_.at(i, v) != kZero || g_.at(v, i) != kZero;
      const bool nj = g_.at(j, v) != kZero || g_.at(v, j) != kZero;
      common += (ni && nj) ? 1.0 : 0.0;
      paths += a_(i, v) * a_(v, j);
    }
    out[o++] = common;
    out[o++] = paths;
    out[o++] = a_(i, i);
    out[o++] = a_(j, j);
    out[o++] = i == j ? 1.0 : 0.0;
    return out;
  }

 private:
  const ObservedGraph& g_;
  Matrix a_;
  AdjacencyView view_;
  Vector out_degree_, in_degree_;
};

inline Vector joint_features(const ObservedGraph& g, NodePair pair) { return JointFeatures(g)(pair.first, pair.second); }

// ---------------------------------------------------------------------------
// Positional embeddings

inline NodeEmbeddingTable one_hot_embed(const ObservedGraph& g) {
  NodeEmbeddingTable t;
  t.kind = NodeEmbeddingKind::one_hot;
  t.rows.assign(g.size(), Vector(g.size(), 0.0));
  for (std::size_t v = 0; v < g.size(); ++v) t.rows[v][v] = 1.0;
  return t;
}

/// Squared reconstruction loss sum_{i,j} (a_ij - U_i . V_j)^2 / n^2 and its
/// gradient. U and V are n x d.
struct FactorizationState {
  Matrix u, v;
};

inline double factorization_loss(const Matrix& a, const FactorizationState& s) {
  const auto n = a.rows(), d = s.u.cols();
  double loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += s.u(i, k) * s.v(j, k);
      loss += (a(i, j) - dot) * (a(i, j) - dot);
    }
  }
  return loss / static_cast<double>(n * n);
}

inline FactorizationState factorization_gradient(const Matrix& a, const FactorizationState& s) {
  const auto n = a.rows(), d = s.u.cols();
  FactorizationState grad{Matrix(n, d), Matrix(n, d)};
  const double scale = 2.0 / static_cast<double>(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += s.u(i, k) * s.v(j, k);
      const double r = (dot - a(i, j)) * scale;
      for (std::size_t k = 0; k < d; ++k) {
        grad.u(i, k) += r * s.v(j, k);
        grad.v(j, k) += r * s.u(i, k);
      }
    }
  }
  return grad;
}

struct FactorizationOptions {
  std::size_t dim = 8;
  std::size_t epochs = 200;
  double lr = 0.05;
  std::uint64_t seed = 0;
  /// Sampled entries per epoch; 0 means n^2.
  std::size_t samples_per_epoch = 0;
};

struct FactorizationResult {
  NodeEmbeddingTable table;
  FactorizationState state;
  std::vector<double> loss_curve;  // full-matrix loss after each epoch
};

/// SGD on uniformly sampled entries.
inline FactorizationResult factorization_train(const ObservedGraph& g, const FactorizationOptions& o) {
  const auto n = g.size(), d = o.dim;
  if (d == 0) throw Error("factorization dimension must be positive");
  // Entries are read from the graph; a dense copy is too large for forests.
  auto a = [&g](std::size_t i, std::size_t j) { return g.alphabet().numeric(g.at(i, j)); };
  Rng rng(derive_key(o.seed, "factorization"));
  FactorizationResult r;
  r.state = {Matrix(n, d), Matrix(n, d)};
  const double init = 0.1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      r.state.u(i, k) = init * rng.normal();
      r.state.v(i, k) = init * rng.normal();
    }
  }
  auto& u = r.state.u;
  auto& v = r.state.v;
  auto full_loss = [&] {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0;
        for (std::size_t k = 0; k < d; ++k) dot += u(i, k) * v(j, k);
        total += (dot - a(i, j)) * (dot - a(i, j));
      }
    }
    return n ? total / static_cast<double>(n * n) : 0.0;
  };
  const auto per_epoch = o.samples_per_epoch ? o.samples_per_epoch : n * n;
  for (std::size_t e = 0; e < o.epochs; ++e) {
    for (std::size_t step = 0; step < per_epoch; ++step) {
      const auto i = rng.below(n), j = rng.below(n);
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += u(i, k) * v(j, k);
      const double res = dot - a(i, j);
      for (std::size_t k = 0; k < d; ++k) {
        const double gu = 2 * res * v(j, k), gv = 2 * res * u(i, k);
        u(i, k) -= o.lr * gu;
        v(j, k) -= o.lr * gv;
      }
    }
    const double loss = full_loss();
    if (!std::isfinite(loss) || loss > 1e6) throw Error("factorization diverged; reduce lr");
    r.loss_curve.push_back(loss);
  }
  r.table.kind = NodeEmbeddingKind::factorization;
  r.table.rows.assign(n, Vector(2 * d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      r.table.rows[i][k] = u(i, k);
      r.table.rows[i][d + k] = v(i, k);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Pair representations

enum class PairKind { labeled_wl, joint_features, node_concat, node_hadamard };

inline const char* to_string(PairKind k) {
  switch (k) {
    case PairKind::labeled_wl: return "labeled_wl";
    case PairKind::joint_features: return "joint_features";
    case PairKind::node_concat: return "node_concat";
    case PairKind::node_hadamard: return "node_hadamard";
  }
  return "?";
}

inline PairKind parse_pair_kind(const std::string& s) {
  if (s == "labeled_wl") return PairKind::labeled_wl;
  if (s == "joint_features") return PairKind::joint_features;
  if (s == "node_concat") return PairKind::node_concat;
  if (s == "node_hadamard") return PairKind::node_hadamard;
  throw Error("unknown pair embedding '" + s + "'");
}

/// Gamma(i, j, g) for a fixed graph: one of the joint encoders or a binding
/// of a node-embedding table.
class PairwiseEmbedding {
 public:
  static PairwiseEmbedding labeled_wl(const ObservedGraph& g, LabeledWlOptions options = {}) {
    PairwiseEmbedding e(PairKind::labeled_wl, g.size());
    e.wl_ = std::make_shared<LabeledWl>(g, options);
    e.wl_options_ = options;
    return e;
  }

  static PairwiseEmbedding joint(const ObservedGraph& g) {
    PairwiseEmbedding e(PairKind::joint_features, g.size());
    e.graph_ = std::make_shared<ObservedGraph>(g);
    e.joint_ = std::make_shared<JointFeatures>(*e.graph_);
    return e;
  }

  static PairwiseEmbedding nodes(NodeEmbeddingTable table, bool hadamard = false) {
    PairwiseEmbedding e(hadamard ? PairKind::node_hadamard : PairKind::node_concat, table.size());
    e.table_ = std::make_shared<NodeEmbeddingTable>(std::move(table));
    return e;
  }

  PairKind kind() const { return kind_; }
  std::size_t node_count() const { return n_; }
  const NodeEmbeddingTable* table() const { return table_.get(); }
  const LabeledWlOptions& wl_options() const { return wl_options_; }

  /// True for encoders that are constant on pair orbits by construction.
  bool structural() const {
    return kind_ == PairKind::labeled_wl || kind_ == PairKind::joint_features ||
           (table_ && table_->kind == NodeEmbeddingKind::wl_histogram);
  }

  std::size_t dim() const {
    switch (kind_) {
      case PairKind::labeled_wl: return wl_->dim();
      case PairKind::joint_features: return joint_->dim();
      case PairKind::node_concat: return 2 * table_->dim();
      case PairKind::node_hadamard: return table_->dim();
    }
    return 0;
  }

  Vector operator()(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) throw Error("pair out of range");
    switch (kind_) {
      case PairKind::labeled_wl: return (*wl_)(i, j);
      case PairKind::joint_features: return (*joint_)(i, j);
      case PairKind::node_concat: {
        Vector out(table_->rows[i]);
        out.insert(out.end(), table_->rows[j].begin(), table_->rows[j].end());
        return out;
      }
      case PairKind::node_hadamard: {
        Vector out(table_->rows[i]);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] *= table_->rows[j][k];
        return out;
      }
    }
    return {};
  }

  Vector operator()(NodePair p) const { return (*this)(p.first, p.second); }

 private:
  PairwiseEmbedding(PairKind kind, std::size_t n) : kind_(kind), n_(n) {}

  PairKind kind_;
  std::size_t n_;
  LabeledWlOptions wl_options_;
  std::shared_ptr<LabeledWl> wl_;
  std::shared_ptr<ObservedGraph> graph_;
  std::shared_ptr<JointFeatures> joint_;
  std::shared_ptr<NodeEmbeddingTable> table_;
};

// ---------------------------------------------------------------------------
// Dumps

inline void write_embedding_csv(std::ostream& os, const NodeEmbeddingTable& t) {
  os << "node";
  for (std::size_t k = 0; k < t.dim(); ++k) os << ",dim" << k;
  os << '\n';
  for (std::size_t v = 0; v < t.size(); ++v) {
    os << v;
    for (auto x : t.rows[v]) os << ',' << x;
    os << '\n';
  }
}

inline void write_pairwise_csv(std::ostream& os, const PairwiseEmbedding& e, const std::vector<NodePair>& pairs) {
  os << "i,j";
  for (std::size_t k = 0; k < e.dim(); ++k) os << ",dim" << k;
  os << '\n';
  for (auto p : pairs) {
    os << p.first << ',' << p.second;
    for (auto x : e(p)) os << ',' << x;
    os << '\n';
  }
}

}  // namespace orbitlift
