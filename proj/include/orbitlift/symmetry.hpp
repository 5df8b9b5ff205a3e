#pragma once

#include <algorithm>
#include <cstddef>
#include <tuple>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "orbitlift/error.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/isomorphism.hpp"
#include "orbitlift/refinement.hpp"
#include "orbitlift/scm.hpp"

namespace orbitlift {

inline constexpr std::size_t kExactAutomorphismLimit = 64;

struct AutomorphismGroup {
  std::vector<Permutation> generators;
  boost::multiprecision::cpp_int order = 1;

  std::string order_string() const { return order.str(); }
};

namespace detail {

inline bool fixes_graph(const Permutation& p, const ObservedGraph& g) {
  const auto n = g.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (g.at(p(i), p(j)) != g.at(i, j)) return false;
    }
  }
  return true;
}

inline std::vector<std::size_t> orbit_of(std::size_t x, const std::vector<Permutation>& gens, std::size_t n) {
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> orbit{x};
  seen[x] = 1;
  for (std::size_t head = 0; head < orbit.size(); ++head) {
    for (const auto& g : gens) {
      const auto y = g(orbit[head]);
      if (!seen[y]) {
        seen[y] = 1;
        orbit.push_back(y);
      }
    }
  }
  return orbit;
}

// Stabilizer-chain search. The leftmost path of the individualization tree
// fixes a base b_0..b_{m-1}. Working from the deepest level up, each level k
// asks, for every w in b_k's cell outside the orbit known so far, whether an
// automorphism fixing b_0..b_{k-1} maps b_k to w. Such a map carries the
// left path onto a path below w with identical refinement traces, so the
// search only follows branches whose traces match the left path.
class AutomorphismSearch {
 public:
  explicit AutomorphismSearch(const ObservedGraph& g) : g_(g), refiner_(g) {}

  AutomorphismGroup run() {
    AutomorphismGroup group;
    path_.push_back(refiner_.refine(refiner_.attribute_colors()));
    while (!path_.back().discrete()) {
      cells_.push_back(target_cell(path_.back()));
      base_.push_back(cells_.back().front());
      path_.push_back(refiner_.individualize(path_.back(), base_.back()));
    }
    const auto& leaf = path_.back();
    left_inverse_.assign(g_.size(), 0);
    for (std::size_t v = 0; v < g_.size(); ++v) left_inverse_[leaf.color[v]] = v;

    for (std::size_t k = base_.size(); k-- > 0;) {
      auto orbit = orbit_of(base_[k], group.generators, g_.size());
      for (auto w : cells_[k]) {
        if (std::find(orbit.begin(), orbit.end(), w) != orbit.end()) continue;
        auto child = refiner_.individualize(path_[k], w);
        if (child.trace != path_[k + 1].trace) continue;
        if (auto a = extend(child, k + 1)) {
          group.generators.push_back(std::move(*a));
          orbit = orbit_of(base_[k], group.generators, g_.size());
        }
      }
      group.order *= orbit.size();
    }
    return group;
  }

 private:
  std::optional<Permutation> extend(const RefinedPartition& p, std::size_t level) {
    if (p.discrete()) {
      // Left leaf node x has colour c; the matching node here has colour c.
      std::vector<std::size_t> m(g_.size());
      for (std::size_t v = 0; v < g_.size(); ++v) m[left_inverse_[p.color[v]]] = v;
      Permutation a(std::move(m));
      if (fixes_graph(a, g_)) return a;
      return std::nullopt;
    }
    if (level >= base_.size()) return std::nullopt;
    for (auto x : target_cell(p)) {
      auto child = refiner_.individualize(p, x);
      if (child.trace != path_[level + 1].trace) continue;
      if (auto a = extend(child, level + 1)) return a;
    }
    return std::nullopt;
  }

  const ObservedGraph& g_;
  ColorRefiner refiner_;
  std::vector<RefinedPartition> path_;
  std::vector<std::vector<std::size_t>> cells_;
  std::vector<std::size_t> base_;
  std::vector<std::size_t> left_inverse_;
};

}  // namespace detail

/// Generators and exact order of the automorphism group.
inline AutomorphismGroup automorphism_group(const ObservedGraph& g, std::size_t limit = kExactAutomorphismLimit) {
  if (g.size() > limit) throw Error("graph too large for exact automorphism search");
  if (g.size() == 0) return {};
  return detail::AutomorphismSearch(g).run();
}

/// Node and ordered-pair orbits under a group, as dense ids numbered by
/// first occurrence in index order.
struct OrbitPartition {
  std::size_t n = 0;
  std::vector<std::size_t> node_orbit;
  std::vector<std::size_t> pair_orbit;  // row-major n x n
  std::size_t node_orbit_count = 0;
  std::size_t pair_orbit_count = 0;

  std::size_t pair(std::size_t i, std::size_t j) const { return pair_orbit[i * n + j]; }
  std::size_t pair(NodePair p) const { return pair(p.first, p.second); }

  std::vector<std::size_t> node_members(std::size_t orbit) const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < n; ++v) {
      if (node_orbit[v] == orbit) out.push_back(v);
    }
    return out;
  }

  std::vector<NodePair> pair_members(std::size_t orbit) const {
    std::vector<NodePair> out;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (pair(i, j) == orbit) out.push_back({i, j});
      }
    }
    return out;
  }
};

namespace detail {

inline std::pair<std::vector<std::size_t>, std::size_t> dense_ids(UnionFind& uf, std::size_t count) {
  std::vector<std::size_t> id(count), root_id(count, static_cast<std::size_t>(-1));
  std::size_t next = 0;
  for (std::size_t x = 0; x < count; ++x) {
    const auto r = uf.find(x);
    if (root_id[r] == static_cast<std::size_t>(-1)) root_id[r] = next++;
    id[x] = root_id[r];
  }
  return {std::move(id), next};
}

}  // namespace detail

inline OrbitPartition orbits(const ObservedGraph& g, const AutomorphismGroup& group) {
  const auto n = g.size();
  detail::UnionFind nodes(n), pairs(n * n);
  for (const auto& a : group.generators) {
    if (a.size() != n) throw Error("permutation/graph size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      nodes.unite(i, a(i));
      for (std::size_t j = 0; j < n; ++j) pairs.unite(i * n + j, a(i) * n + a(j));
    }
  }
  OrbitPartition p;
  p.n = n;
  std::tie(p.node_orbit, p.node_orbit_count) = detail::dense_ids(nodes, n);
  std::tie(p.pair_orbit, p.pair_orbit_count) = detail::dense_ids(pairs, n * n);
  return p;
}

inline OrbitPartition orbits(const ObservedGraph& g) { return orbits(g, automorphism_group(g)); }

/// (i, j, u, v): u shares i's node orbit and v shares j's, yet (u, v) lies in
/// a different pair orbit than (i, j). Diagonal pairs are not considered.
struct PairwiseWitness {
  std::size_t i, j, u, v;
};

inline bool is_valid_witness(const OrbitPartition& p, const PairwiseWitness& w) {
  return w.i != w.j && w.u != w.v && p.node_orbit[w.u] == p.node_orbit[w.i] &&
         p.node_orbit[w.v] == p.node_orbit[w.j] && p.pair(w.u, w.v) != p.pair(w.i, w.j);
}

inline std::optional<PairwiseWitness> is_pairwise_symmetric(const ObservedGraph& g,
                                                            std::size_t limit = kExactAutomorphismLimit) {
  const auto p = orbits(g, automorphism_group(g, limit));
  const auto n = g.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t u = 0; u < n; ++u) {
        if (p.node_orbit[u] != p.node_orbit[i]) continue;
        for (std::size_t v = 0; v < n; ++v) {
          const PairwiseWitness w{i, j, u, v};
          if (is_valid_witness(p, w)) return w;
        }
      }
    }
  }
  return std::nullopt;
}

struct OrbitEstimate {
  std::vector<double> probabilities;  // per alphabet code
  std::size_t probes = 0;
  bool observed = false;
};

/// Per pair orbit MAP estimate of the outcome distribution under a Dirichlet
/// prior with the given pseudo-counts: (count_k + a_k - 1) / (N + sum a - K).
/// Orbits without probes get the prior mean and observed = false. When the
/// mode is not interior (some a_k < 1 with no counts) the negative
/// components are clipped and the rest renormalised.
inline std::vector<OrbitEstimate> orbit_map_estimator(const ProbeSequence& probes, const OrbitPartition& partition,
                                                      const std::vector<double>& pseudo_counts) {
  const auto k = pseudo_counts.size();
  if (k < 2) throw Error("prior needs at least two categories");
  double prior_total = 0;
  for (auto a : pseudo_counts) {
    if (!(a > 0)) throw Error("pseudo-counts must be positive");
    prior_total += a;
  }
  std::vector<std::vector<double>> counts(partition.pair_orbit_count, std::vector<double>(k, 0));
  std::vector<std::size_t> n(partition.pair_orbit_count, 0);
  for (const auto& r : probes.records) {
    if (r.pair.first >= partition.n || r.pair.second >= partition.n) throw Error("probe pair out of range");
    if (r.outcome >= k) throw Error("probe outcome outside the prior's categories");
    const auto o = partition.pair(r.pair);
    counts[o][r.outcome] += 1;
    ++n[o];
  }
  std::vector<OrbitEstimate> out(partition.pair_orbit_count);
  for (std::size_t o = 0; o < out.size(); ++o) {
    auto& e = out[o];
    e.probes = n[o];
    e.observed = n[o] > 0;
    e.probabilities.assign(k, 0);
    if (!e.observed) {
      for (std::size_t c = 0; c < k; ++c) e.probabilities[c] = pseudo_counts[c] / prior_total;
      continue;
    }
    double total = 0;
    for (std::size_t c = 0; c < k; ++c) {
      e.probabilities[c] = std::max(0.0, counts[o][c] + pseudo_counts[c] - 1.0);
      total += e.probabilities[c];
    }
    if (total <= 0) {
      for (std::size_t c = 0; c < k; ++c) e.probabilities[c] = (counts[o][c] + pseudo_counts[c]) / (n[o] + prior_total);
      continue;
    }
    for (auto& x : e.probabilities) x /= total;
  }
  return out;
}

inline void write_orbits_csv(std::ostream& os, const OrbitPartition& p) {
  os << "i,j,pair_orbit_id\n";
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t j = 0; j < p.n; ++j) os << i << ',' << j << ',' << p.pair(i, j) << '\n';
  }
}

inline void write_group(std::ostream& os, const AutomorphismGroup& group) {
  for (const auto& a : group.generators) os << a.to_cycles() << '\n';
}

}  // namespace orbitlift
