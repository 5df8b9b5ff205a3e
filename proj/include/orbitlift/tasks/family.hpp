#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "orbitlift/error.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/rng.hpp"

namespace orbitlift::tasks {

enum class Gender : std::uint8_t { male = 1, female = 2 };

struct FamilyOptions {
  std::size_t n_trees = 100;
  double iso_fraction = 0.30;
  std::size_t max_size = 26;
  double stop_probability = 0.002;
  std::size_t max_depth = 5;      // generations spanned by a grown tree
  std::size_t max_branching = 5;  // children per person
};

/// Two isomorphic copies of one donor tree hung below the same leaf.
struct PlantedPair {
  std::size_t tree = 0;
  std::size_t anchor = 0;
  std::vector<std::size_t> first, second;  // second[k] is the copy of first[k]
};

struct FamilyTreeKb {
  std::vector<Gender> gender;
  std::vector<NodePair> parent_edges;  // (parent, child)
  std::vector<std::size_t> tree_of;
  std::size_t tree_count = 0;
  std::vector<PlantedPair> planted;

  std::size_t size() const { return gender.size(); }

  /// parentOf as a directed graph; the diagonal carries gender (1 male, 2 female).
  ObservedGraph graph() const {
    ObservedGraph g(size(), true, Alphabet(3));
    for (std::size_t v = 0; v < size(); ++v) g.set(v, v, static_cast<EdgeValue>(gender[v]));
    for (auto [p, c] : parent_edges) g.set(p, c, 1);
    return g;
  }
};

namespace detail {

struct Tree {
  std::vector<Gender> gender;
  std::vector<int> level;
  std::vector<NodePair> edges;  // (parent, child)
  std::vector<std::vector<std::size_t>> parents, children;

  std::size_t size() const { return gender.size(); }

  std::size_t add(Gender g, int lvl) {
    gender.push_back(g);
    level.push_back(lvl);
    parents.emplace_back();
    children.emplace_back();
    return gender.size() - 1;
  }

  void link(std::size_t parent, std::size_t child) {
    edges.push_back({parent, child});
    parents[child].push_back(parent);
    children[parent].push_back(child);
  }
};

inline Gender random_gender(Rng& rng) { return rng.bernoulli(0.5) ? Gender::female : Gender::male; }

/// Grows one tree from a single person by adding a child or a parent to a
/// random person until the size cap or the random stop event.
inline Tree grow_tree(Rng& rng, const FamilyOptions& o) {
  Tree t;
  t.add(random_gender(rng), 0);
  int lo = 0, hi = 0;
  std::size_t failures = 0;
  while (t.size() < o.max_size && !rng.bernoulli(o.stop_probability)) {
    const auto x = rng.below(t.size());
    const bool child = rng.bernoulli(0.5);
    const int lvl = t.level[x] + (child ? 1 : -1);
    const bool fits = static_cast<std::size_t>(std::max(hi, lvl) - std::min(lo, lvl) + 1) <= o.max_depth;
    const bool ok = fits && (child ? t.children[x].size() < o.max_branching : t.parents[x].size() < 2);
    if (!ok) {
      if (++failures > 100000) throw Error("family tree growth could not satisfy its constraints");
      continue;
    }
    Gender g = random_gender(rng);
    // A second parent has the other gender.
    if (!child && t.parents[x].size() == 1) {
      g = t.gender[t.parents[x][0]] == Gender::male ? Gender::female : Gender::male;
    }
    const auto v = t.add(g, lvl);
    child ? t.link(x, v) : t.link(v, x);
    lo = std::min(lo, lvl);
    hi = std::max(hi, lvl);
  }
  return t;
}

// AHU encoding rooted at v: gender, then the sorted codes of the neighbours
// below v, each tagged with the direction of its parentOf edge.
inline std::string rooted_code(const Tree& t, std::size_t v, std::size_t from) {
  std::vector<std::string> parts;
  for (auto c : t.children[v]) {
    if (c != from) parts.push_back("d" + rooted_code(t, c, v));
  }
  for (auto p : t.parents[v]) {
    if (p != from) parts.push_back("u" + rooted_code(t, p, v));
  }
  std::sort(parts.begin(), parts.end());
  std::string out = "(";
  out += static_cast<char>('0' + static_cast<int>(t.gender[v]));
  for (const auto& s : parts) out += s;
  return out + ")";
}

}  // namespace detail

/// Canonical code of a family tree (as an unrooted labelled tree with
/// oriented edges): equal codes iff the trees are isomorphic.
inline std::string tree_code(const std::vector<Gender>& gender, const std::vector<NodePair>& edges) {
  detail::Tree t;
  for (auto g : gender) t.add(g, 0);
  for (auto [p, c] : edges) t.link(p, c);
  const auto n = t.size();
  if (n == 0) return "";
  if (edges.size() + 1 != n) throw Error("family tree must be connected and acyclic");
  // Centre(s) by repeatedly stripping leaves.
  std::vector<std::size_t> degree(n);
  std::vector<std::size_t> layer;
  for (std::size_t v = 0; v < n; ++v) {
    degree[v] = t.children[v].size() + t.parents[v].size();
    if (degree[v] <= 1) layer.push_back(v);
  }
  std::size_t remaining = n;
  while (remaining > 2) {
    remaining -= layer.size();
    std::vector<std::size_t> next;
    for (auto v : layer) {
      auto visit = [&](std::size_t u) {
        if (--degree[u] == 1) next.push_back(u);
      };
      for (auto c : t.children[v]) visit(c);
      for (auto p : t.parents[v]) visit(p);
    }
    layer = std::move(next);
  }
  std::string best;
  for (auto c : layer) {
    auto code = detail::rooted_code(t, c, static_cast<std::size_t>(-1));
    if (best.empty() || code < best) best = std::move(code);
  }
  return best;
}

/// Forest of non-isomorphic trees. Every host tree gets two subtrees hung
/// below a random leaf: for round(iso_fraction * n_trees) hosts both are
/// copies of one donor, for the rest they are two distinct donors. Person
/// ids are shuffled at the end.
inline FamilyTreeKb generate_family_forest(const FamilyOptions& o, std::uint64_t seed) {
  if (o.n_trees == 0) throw Error("n_trees must be at least 1");
  if (!(o.iso_fraction >= 0 && o.iso_fraction <= 1)) throw Error("iso_fraction must lie in [0, 1]");
  Rng rng(derive_key(seed, "family"));
  const auto planted = static_cast<std::size_t>(std::llround(o.iso_fraction * static_cast<double>(o.n_trees)));
  const auto needed = o.n_trees + planted + 2 * (o.n_trees - planted);
  std::vector<detail::Tree> pool;
  std::set<std::string> seen;
  std::size_t attempts = 0;
  while (pool.size() < needed) {
    auto t = detail::grow_tree(rng, o);
    if (seen.insert(tree_code(t.gender, t.edges)).second) {
      pool.push_back(std::move(t));
    } else if (++attempts > 100 * needed) {
      throw Error("could not generate enough non-isomorphic family trees");
    }
  }
  std::vector<bool> is_planted(o.n_trees, false);
  {
    std::vector<std::size_t> order(o.n_trees);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t k = 0; k < planted; ++k) is_planted[order[k]] = true;
  }

  FamilyTreeKb kb;
  kb.tree_count = o.n_trees;
  auto append = [&](const detail::Tree& t, std::size_t tree) {
    const auto base = kb.size();
    for (auto g : t.gender) {
      kb.gender.push_back(g);
      kb.tree_of.push_back(tree);
    }
    for (auto [p, c] : t.edges) kb.parent_edges.push_back({base + p, base + c});
    return base;
  };
  auto hang = [&](const detail::Tree& donor, std::size_t tree, std::size_t anchor, std::size_t top) {
    const auto base = append(donor, tree);
    kb.parent_edges.push_back({anchor, base + top});
    std::vector<std::size_t> nodes(donor.size());
    std::iota(nodes.begin(), nodes.end(), base);
    return nodes;
  };
  std::size_t next_donor = o.n_trees;
  for (std::size_t tree = 0; tree < o.n_trees; ++tree) {
    const auto& host = pool[tree];
    const auto base = append(host, tree);
    std::vector<std::size_t> leaves;
    for (std::size_t v = 0; v < host.size(); ++v) {
      if (host.children[v].empty()) leaves.push_back(v);
    }
    const auto anchor = base + leaves[rng.below(leaves.size())];
    auto top_of = [&](const detail::Tree& d) {
      std::vector<std::size_t> tops;
      for (std::size_t v = 0; v < d.size(); ++v) {
        if (d.parents[v].empty()) tops.push_back(v);
      }
      return tops[rng.below(tops.size())];
    };
    if (is_planted[tree]) {
      const auto& donor = pool[next_donor++];
      const auto top = top_of(donor);
      PlantedPair p{tree, anchor, hang(donor, tree, anchor, top), {}};
      p.second = hang(donor, tree, anchor, top);
      kb.planted.push_back(std::move(p));
    } else {
      for (int k = 0; k < 2; ++k) {
        const auto& donor = pool[next_donor++];
        hang(donor, tree, anchor, top_of(donor));
      }
    }
  }

  // Shuffle person ids so that id order carries no structure.
  std::vector<std::size_t> relabel(kb.size());
  std::iota(relabel.begin(), relabel.end(), std::size_t{0});
  rng.shuffle(relabel);
  FamilyTreeKb out;
  out.tree_count = kb.tree_count;
  out.gender.resize(kb.size());
  out.tree_of.resize(kb.size());
  for (std::size_t v = 0; v < kb.size(); ++v) {
    out.gender[relabel[v]] = kb.gender[v];
    out.tree_of[relabel[v]] = kb.tree_of[v];
  }
  for (auto [p, c] : kb.parent_edges) out.parent_edges.push_back({relabel[p], relabel[c]});
  std::sort(out.parent_edges.begin(), out.parent_edges.end());
  for (auto p : kb.planted) {
    for (auto& v : p.first) v = relabel[v];
    for (auto& v : p.second) v = relabel[v];
    p.anchor = relabel[p.anchor];
    out.planted.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ontology: parentOf plus 27 derived relations. R(x, y) reads "x is R of y".

inline const std::array<const char*, 28> kRelationNames{
    "parentOf",        "fatherOf",         "motherOf",           "childOf",          "sonOf",
    "daughterOf",      "siblingOf",        "brotherOf",          "sisterOf",         "grandparentOf",
    "grandfatherOf",   "grandmotherOf",    "grandchildOf",       "grandsonOf",       "granddaughterOf",
    "auntOrUncleOf",   "uncleOf",          "auntOf",             "nieceOrNephewOf",  "nephewOf",
    "nieceOf",         "cousinOf",         "boyCousinOf",        "girlCousinOf",     "greatGrandparentOf",
    "greatGrandchildOf", "greatAuntOrUncleOf", "greatNieceOrNephewOf"};

using RelationMap = std::map<std::string, std::vector<NodePair>>;

inline RelationMap infer_relations(const FamilyTreeKb& kb) {
  const auto n = kb.size();
  for (auto [p, c] : kb.parent_edges) {
    if (p >= n || c >= n) throw Error("missing gender attribute");
  }
  for (auto g : kb.gender) {
    if (g != Gender::male && g != Gender::female) throw Error("missing gender attribute");
  }
  std::vector<std::vector<std::size_t>> parents(n), children(n);
  for (auto [p, c] : kb.parent_edges) {
    parents[c].push_back(p);
    children[p].push_back(c);
  }
  std::map<std::string, std::set<NodePair>> r;
  for (const auto* name : kRelationNames) r[name];
  auto male = [&](std::size_t v) { return kb.gender[v] == Gender::male; };
  // Gendered split of an ungendered relation by the gender of x.
  auto add = [&](const char* all, const char* m, const char* f, std::size_t x, std::size_t y) {
    r[all].insert({x, y});
    if (m) r[male(x) ? m : f].insert({x, y});
  };
  auto siblings = [&](std::size_t x) {
    std::set<std::size_t> s;
    for (auto p : parents[x]) {
      for (auto c : children[p]) {
        if (c != x) s.insert(c);
      }
    }
    return s;
  };
  for (std::size_t x = 0; x < n; ++x) {
    for (auto y : children[x]) {
      add("parentOf", "fatherOf", "motherOf", x, y);
      add("childOf", "sonOf", "daughterOf", y, x);
      for (auto z : children[y]) {
        add("grandparentOf", "grandfatherOf", "grandmotherOf", x, z);
        add("grandchildOf", "grandsonOf", "granddaughterOf", z, x);
        for (auto w : children[z]) {
          add("greatGrandparentOf", nullptr, nullptr, x, w);
          add("greatGrandchildOf", nullptr, nullptr, w, x);
        }
      }
    }
    for (auto s : siblings(x)) {
      add("siblingOf", "brotherOf", "sisterOf", x, s);
      for (auto y : children[s]) {
        add("auntOrUncleOf", "uncleOf", "auntOf", x, y);
        add("nieceOrNephewOf", "nephewOf", "nieceOf", y, x);
        for (auto z : children[y]) {
          add("greatAuntOrUncleOf", nullptr, nullptr, x, z);
          add("greatNieceOrNephewOf", nullptr, nullptr, z, x);
        }
      }
    }
    for (auto p : parents[x]) {
      for (auto q : siblings(p)) {
        for (auto y : children[q]) {
          if (y != x) add("cousinOf", "boyCousinOf", "girlCousinOf", x, y);
        }
      }
    }
  }
  RelationMap out;
  for (auto& [name, pairs] : r) out[name] = std::vector<NodePair>(pairs.begin(), pairs.end());
  return out;
}

inline void write_relation_triples(std::ostream& os, const RelationMap& relations) {
  for (const auto* name : kRelationNames) {
    for (auto [x, y] : relations.at(name)) os << x << ' ' << name << ' ' << y << '\n';
  }
}

// ---------------------------------------------------------------------------
// Split

struct FamilyExample {
  NodePair pair;
  bool positive = false;
  std::string relation;  // first derived relation holding for the pair, or "none"
};

struct FamilySplit {
  std::vector<FamilyExample> train, test;
};

/// Train: every related ordered pair inside the first planted copy plus as
/// many uniformly drawn unrelated pairs from the same copy. Test: related
/// pairs inside the second copy plus every unrelated pair with one endpoint
/// in each copy. "Related" means any relation other than parentOf itself.
inline FamilySplit family_split(const FamilyTreeKb& kb, const RelationMap& relations, std::uint64_t seed) {
  if (kb.planted.empty()) throw Error("no isomorphic split available");
  std::map<NodePair, std::string> related;
  for (const auto* name : kRelationNames) {
    if (std::string(name) == "parentOf") continue;
    for (auto p : relations.at(name)) related.emplace(p, name);
  }
  auto example = [&](NodePair p) {
    const auto it = related.find(p);
    return it == related.end() ? FamilyExample{p, false, "none"} : FamilyExample{p, true, it->second};
  };
  Rng rng(derive_key(seed, "family-split"));
  FamilySplit s;
  for (const auto& planted : kb.planted) {
    std::vector<FamilyExample> negatives;
    const auto before = s.train.size();
    for (auto x : planted.first) {
      for (auto y : planted.first) {
        if (x == y) continue;
        auto e = example({x, y});
        (e.positive ? s.train : negatives).push_back(e);
      }
    }
    const auto positives = s.train.size() - before;
    rng.shuffle(negatives);
    negatives.resize(std::min(negatives.size(), positives));
    s.train.insert(s.train.end(), negatives.begin(), negatives.end());
    for (auto x : planted.second) {
      for (auto y : planted.second) {
        if (x == y) continue;
        auto e = example({x, y});
        if (e.positive) s.test.push_back(e);
      }
    }
    for (auto x : planted.first) {
      for (auto y : planted.second) {
        for (auto p : {NodePair{x, y}, NodePair{y, x}}) {
          auto e = example(p);
          if (!e.positive) s.test.push_back(e);
        }
      }
    }
  }
  return s;
}

}  // namespace orbitlift::tasks
