#pragma once

#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "orbitlift/error.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/refinement.hpp"

namespace orbitlift {

inline constexpr std::size_t kExactIsomorphismLimit = 12;

/// Canonical representative of an isomorphism class. `labeling` maps g onto
/// the representative: apply_permutation(labeling, g) serializes to `bytes`.
struct CanonicalForm {
  std::string bytes;
  Permutation labeling;
};

namespace detail {

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }

  std::vector<std::size_t> parent;
};

/// First non-singleton cell (lowest colour), members in increasing node id.
inline std::vector<std::size_t> target_cell(const RefinedPartition& p) {
  std::vector<std::size_t> size(p.cells, 0);
  for (auto c : p.color) ++size[c];
  std::uint32_t cell = 0;
  while (cell < p.cells && size[cell] < 2) ++cell;
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < p.color.size(); ++v) {
    if (p.color[v] == cell) out.push_back(v);
  }
  return out;
}

inline Permutation leaf_labeling(const RefinedPartition& p) {
  std::vector<std::size_t> m(p.color.begin(), p.color.end());
  return Permutation(std::move(m));
}

// Individualization-refinement search for the lexicographically least leaf
// serialization. Leaves with equal serialization yield automorphisms, which
// prune sibling subtrees in the same orbit of the current prefix stabilizer.
class CanonicalSearch {
 public:
  explicit CanonicalSearch(const ObservedGraph& g) : g_(g), refiner_(g) {}

  CanonicalForm run() {
    const auto root = refiner_.refine(refiner_.attribute_colors());
    std::vector<std::size_t> prefix;
    descend(root, prefix);
    return {best_bytes_, best_labeling_};
  }

 private:
  void descend(const RefinedPartition& p, std::vector<std::size_t>& prefix) {
    if (p.discrete()) {
      visit_leaf(p);
      return;
    }
    const auto cell = target_cell(p);
    std::vector<std::size_t> explored;
    for (auto v : cell) {
      if (!explored.empty() && covered(v, explored, prefix)) continue;
      explored.push_back(v);
      prefix.push_back(v);
      descend(refiner_.individualize(p, v), prefix);
      prefix.pop_back();
    }
  }

  // True when v shares an orbit with an explored sibling under the found
  // automorphisms that fix the prefix pointwise.
  bool covered(std::size_t v, const std::vector<std::size_t>& explored,
               const std::vector<std::size_t>& prefix) const {
    UnionFind uf(g_.size());
    bool any = false;
    for (const auto& a : automorphisms_) {
      bool fixes = true;
      for (auto b : prefix) fixes = fixes && a(b) == b;
      if (!fixes) continue;
      any = true;
      for (std::size_t x = 0; x < g_.size(); ++x) uf.unite(x, a(x));
    }
    if (!any) return false;
    for (auto w : explored) {
      if (uf.find(w) == uf.find(v)) return true;
    }
    return false;
  }

  void visit_leaf(const RefinedPartition& p) {
    auto lab = leaf_labeling(p);
    auto bytes = apply_permutation(lab, g_).serialize();
    if (!found_) {
      found_ = true;
      best_bytes_ = std::move(bytes);
      best_labeling_ = std::move(lab);
      return;
    }
    if (bytes == best_bytes_) {
      auto a = compose(best_labeling_.inverse(), lab);
      if (!a.is_identity()) automorphisms_.push_back(std::move(a));
    } else if (bytes < best_bytes_) {
      best_bytes_ = std::move(bytes);
      best_labeling_ = std::move(lab);
    }
  }

  const ObservedGraph& g_;
  ColorRefiner refiner_;
  bool found_ = false;
  std::string best_bytes_;
  Permutation best_labeling_;
  std::vector<Permutation> automorphisms_;
};

}  // namespace detail

inline CanonicalForm canonical_form_with_labeling(const ObservedGraph& g,
                                                  std::size_t limit = kExactIsomorphismLimit) {
  if (g.size() > limit) throw Error("instance too large for exact isomorphism");
  if (g.size() == 0) return {g.serialize(), Permutation::identity(0)};
  return detail::CanonicalSearch(g).run();
}

inline std::string canonical_form(const ObservedGraph& g, std::size_t limit = kExactIsomorphismLimit) {
  return canonical_form_with_labeling(g, limit).bytes;
}

/// Witness p with apply_permutation(p, g1) == g2, or nullopt.
inline std::optional<Permutation> graphs_isomorphic(const ObservedGraph& g1, const ObservedGraph& g2,
                                                    std::size_t limit = kExactIsomorphismLimit) {
  if (g1.size() > limit || g2.size() > limit) {
    throw Error("instance too large for exact isomorphism");
  }
  if (g1.size() != g2.size() || g1.directed() != g2.directed() ||
      g1.alphabet().size() != g2.alphabet().size()) {
    return std::nullopt;
  }
  const auto c1 = canonical_form_with_labeling(g1, limit);
  const auto c2 = canonical_form_with_labeling(g2, limit);
  if (c1.bytes != c2.bytes) return std::nullopt;
  return compose(c2.labeling.inverse(), c1.labeling);
}

}  // namespace orbitlift
