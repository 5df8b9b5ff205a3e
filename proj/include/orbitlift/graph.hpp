#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "orbitlift/error.hpp"

namespace orbitlift {

/// Code into a finite alphabet. Code 0 is the distinguished non-link value.
using EdgeValue = std::uint8_t;
inline constexpr EdgeValue kZero = 0;

using NodePair = std::pair<std::size_t, std::size_t>;

/// Finite value domain. `numeric` optionally maps codes to reals for the
/// numeric embeddings; when empty the cast is the identity code -> code.
class Alphabet {
 public:
  Alphabet() : Alphabet(2) {}

  explicit Alphabet(std::size_t size, std::vector<double> numeric = {})
      : size_(size), numeric_(std::move(numeric)) {
    if (size_ < 2 || size_ > 256) throw Error("alphabet size must be in [2, 256]");
    if (!numeric_.empty() && numeric_.size() != size_) {
      throw Error("alphabet numeric table must have one entry per code");
    }
  }

  std::size_t size() const { return size_; }
  bool contains(std::size_t code) const { return code < size_; }

  double numeric(EdgeValue code) const {
    return numeric_.empty() ? static_cast<double>(code) : numeric_[code];
  }
  const std::vector<double>& numeric_table() const { return numeric_; }

  friend bool operator==(const Alphabet& a, const Alphabet& b) {
    return a.size_ == b.size_ && a.numeric_ == b.numeric_;
  }

 private:
  std::size_t size_;
  std::vector<double> numeric_;
};

/// Dense adjacency over nodes 0..n-1. Undirected graphs keep both (i,j) and
/// (j,i) and every write goes to both. Diagonal entries hold node attributes.
class ObservedGraph {
 public:
  ObservedGraph() = default;

  ObservedGraph(std::size_t n, bool directed, Alphabet alphabet = Alphabet(2),
                std::int64_t observation_time = 0)
      : n_(n),
        directed_(directed),
        alphabet_(std::move(alphabet)),
        observation_time_(observation_time),
        adjacency_(n * n, kZero) {
    if (observation_time_ < 0) throw Error("observation time must be non-negative");
  }

  std::size_t size() const { return n_; }
  bool directed() const { return directed_; }
  const Alphabet& alphabet() const { return alphabet_; }
  std::int64_t observation_time() const { return observation_time_; }
  void set_observation_time(std::int64_t t) { observation_time_ = t; }

  EdgeValue at(std::size_t i, std::size_t j) const { return adjacency_[i * n_ + j]; }

  void set(std::size_t i, std::size_t j, EdgeValue v) {
    if (i >= n_ || j >= n_) throw Error("node index out of range");
    if (!alphabet_.contains(v)) throw Error("edge value outside the alphabet");
    adjacency_[i * n_ + j] = v;
    if (!directed_) adjacency_[j * n_ + i] = v;
  }

  double numeric(std::size_t i, std::size_t j) const { return alphabet_.numeric(at(i, j)); }

  const std::vector<EdgeValue>& raw() const { return adjacency_; }

  std::size_t edge_count() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = directed_ ? 0 : i + 1; j < n_; ++j) {
        if (i != j && at(i, j) != kZero) ++c;
      }
    }
    return c;
  }

  /// Header (n, directedness, alphabet size) followed by the row-major
  /// adjacency. Two graphs serialize equally iff they are equal as labelled
  /// graphs over the same alphabet size.
  std::string serialize() const {
    std::string out;
    out.reserve(16 + adjacency_.size());
    auto put32 = [&out](std::uint32_t v) {
      for (int b = 3; b >= 0; --b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
    };
    put32(static_cast<std::uint32_t>(n_));
    out.push_back(directed_ ? 1 : 0);
    put32(static_cast<std::uint32_t>(alphabet_.size()));
    out.append(reinterpret_cast<const char*>(adjacency_.data()), adjacency_.size());
    return out;
  }

  friend bool operator==(const ObservedGraph& a, const ObservedGraph& b) {
    return a.n_ == b.n_ && a.directed_ == b.directed_ && a.alphabet_ == b.alphabet_ &&
           a.observation_time_ == b.observation_time_ && a.adjacency_ == b.adjacency_;
  }

  /// Same labelled adjacency and value domain, ignoring observation time.
  bool same_adjacency(const ObservedGraph& o) const {
    return n_ == o.n_ && directed_ == o.directed_ && alphabet_.size() == o.alphabet_.size() &&
           adjacency_ == o.adjacency_;
  }

 private:
  std::size_t n_ = 0;
  bool directed_ = false;
  Alphabet alphabet_;
  std::int64_t observation_time_ = 0;
  std::vector<EdgeValue> adjacency_;
};

/// Bijection on 0..n-1. `p(i)` is the image of i.
class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<std::size_t> mapping) : mapping_(std::move(mapping)) {
    std::vector<char> seen(mapping_.size(), 0);
    for (auto v : mapping_) {
      if (v >= mapping_.size() || seen[v]) throw Error("mapping is not a bijection");
      seen[v] = 1;
    }
  }

  static Permutation identity(std::size_t n) {
    std::vector<std::size_t> m(n);
    std::iota(m.begin(), m.end(), std::size_t{0});
    return Permutation(std::move(m));
  }

  static Permutation transposition(std::size_t n, std::size_t a, std::size_t b) {
    auto p = identity(n);
    std::swap(p.mapping_[a], p.mapping_[b]);
    return p;
  }

  std::size_t size() const { return mapping_.size(); }
  std::size_t operator()(std::size_t i) const { return mapping_[i]; }
  const std::vector<std::size_t>& mapping() const { return mapping_; }

  bool is_identity() const {
    for (std::size_t i = 0; i < mapping_.size(); ++i) {
      if (mapping_[i] != i) return false;
    }
    return true;
  }

  Permutation inverse() const {
    std::vector<std::size_t> inv(mapping_.size());
    for (std::size_t i = 0; i < mapping_.size(); ++i) inv[mapping_[i]] = i;
    Permutation r;
    r.mapping_ = std::move(inv);
    return r;
  }

  /// Cycle notation, e.g. "(0 2)(1 3)"; the identity prints as "()".
  std::string to_cycles() const {
    std::string out;
    std::vector<char> seen(mapping_.size(), 0);
    for (std::size_t s = 0; s < mapping_.size(); ++s) {
      if (seen[s] || mapping_[s] == s) continue;
      out += '(';
      std::size_t v = s;
      bool first = true;
      while (!seen[v]) {
        seen[v] = 1;
        if (!first) out += ' ';
        out += std::to_string(v);
        first = false;
        v = mapping_[v];
      }
      out += ')';
    }
    return out.empty() ? "()" : out;
  }

  friend bool operator==(const Permutation& a, const Permutation& b) {
    return a.mapping_ == b.mapping_;
  }
  friend bool operator<(const Permutation& a, const Permutation& b) {
    return a.mapping_ < b.mapping_;
  }

 private:
  std::vector<std::size_t> mapping_;
};

/// (p o q)(i) = p(q(i)); acting with the composite equals acting with q first.
inline Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size()) throw Error("permutation size mismatch");
  std::vector<std::size_t> m(p.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = p(q(i));
  return Permutation(std::move(m));
}

inline ObservedGraph apply_permutation(const Permutation& p, const ObservedGraph& g) {
  if (p.size() != g.size()) throw Error("permutation/graph size mismatch");
  ObservedGraph out(g.size(), g.directed(), g.alphabet(), g.observation_time());
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) out.set(p(i), p(j), g.at(i, j));
  }
  return out;
}

inline NodePair apply_permutation(const Permutation& p, NodePair pair) {
  return {p(pair.first), p(pair.second)};
}

/// Sparse neighbourhood view used by colour refinement and BFS. For every node
/// it lists the other nodes u with a[v][u] != 0 or a[u][v] != 0 together with
/// both directed values.
struct Neighbor {
  std::size_t node;
  EdgeValue out;  // a[v][node]
  EdgeValue in;   // a[node][v]
};

class AdjacencyView {
 public:
  AdjacencyView() = default;

  explicit AdjacencyView(const ObservedGraph& g) : n_(g.size()), lists_(g.size()), labels_(g.size()) {
    for (std::size_t v = 0; v < n_; ++v) {
      labels_[v] = g.at(v, v);
      for (std::size_t u = 0; u < n_; ++u) {
        if (u == v) continue;
        const auto o = g.at(v, u);
        const auto i = g.at(u, v);
        if (o != kZero || i != kZero) lists_[v].push_back({u, o, i});
      }
    }
  }

  /// Subgraph induced by `nodes`; node k of the result is nodes[k].
  AdjacencyView induced(const std::vector<std::size_t>& nodes) const {
    std::vector<std::size_t> sorted(nodes);
    std::sort(sorted.begin(), sorted.end());
    auto local = [&](std::size_t v) -> std::size_t {
      auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
      if (it == sorted.end() || *it != v) return static_cast<std::size_t>(-1);
      return static_cast<std::size_t>(it - sorted.begin());
    };
    std::vector<std::size_t> position(sorted.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) position[local(nodes[k])] = k;
    AdjacencyView out;
    out.n_ = nodes.size();
    out.lists_.resize(nodes.size());
    out.labels_.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      out.labels_[k] = labels_[nodes[k]];
      for (const auto& nb : lists_[nodes[k]]) {
        const auto l = local(nb.node);
        if (l != static_cast<std::size_t>(-1)) out.lists_[k].push_back({position[l], nb.out, nb.in});
      }
    }
    return out;
  }

  std::size_t size() const { return n_; }
  const std::vector<Neighbor>& neighbors(std::size_t v) const { return lists_[v]; }
  EdgeValue label(std::size_t v) const { return labels_[v]; }

  /// Hop distances from `source` ignoring direction; unreachable = SIZE_MAX.
  std::vector<std::size_t> distances_from(std::size_t source) const {
    std::vector<std::size_t> dist(n_, static_cast<std::size_t>(-1));
    std::vector<std::size_t> queue{source};
    dist[source] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const auto v = queue[head];
      for (const auto& nb : lists_[v]) {
        if (dist[nb.node] == static_cast<std::size_t>(-1)) {
          dist[nb.node] = dist[v] + 1;
          queue.push_back(nb.node);
        }
      }
    }
    return dist;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::vector<Neighbor>> lists_;
  std::vector<EdgeValue> labels_;
};

// Edge-list text format:
//   n <count> directed <0|1> alphabet <k>
//   i j code
// Unlisted pairs are ZERO. Undirected graphs list each pair once (i <= j).

inline void write_edge_list(std::ostream& os, const ObservedGraph& g) {
  os << "n " << g.size() << " directed " << (g.directed() ? 1 : 0) << " alphabet "
     << g.alphabet().size() << '\n';
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = g.directed() ? 0 : i; j < g.size(); ++j) {
      if (g.at(i, j) != kZero) os << i << ' ' << j << ' ' << static_cast<int>(g.at(i, j)) << '\n';
    }
  }
}

inline ObservedGraph read_edge_list(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) throw Error("edge list: missing header");
  std::istringstream hs(line);
  std::string kn, kd, ka;
  long long n = -1, directed = -1, k = -1;
  if (!(hs >> kn >> n >> kd >> directed >> ka >> k) || kn != "n" || kd != "directed" ||
      ka != "alphabet" || n < 0 || (directed != 0 && directed != 1) || k < 2) {
    throw Error("edge list: malformed header at line " + std::to_string(line_no));
  }
  ObservedGraph g(static_cast<std::size_t>(n), directed == 1, Alphabet(static_cast<std::size_t>(k)));
  while (next_line()) {
    std::istringstream ls(line);
    long long i = -1, j = -1, c = -1;
    std::string extra;
    if (!(ls >> i >> j >> c) || (ls >> extra) || i < 0 || j < 0 || i >= n || j >= n || c < 0 ||
        c >= k) {
      throw Error("edge list: malformed line " + std::to_string(line_no));
    }
    const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
    const auto code = static_cast<EdgeValue>(c);
    if (!g.directed() && g.at(ui, uj) != kZero && g.at(ui, uj) != code) {
      throw Error("edge list: conflicting undirected entry at line " + std::to_string(line_no));
    }
    g.set(ui, uj, code);
  }
  return g;
}

}  // namespace orbitlift
