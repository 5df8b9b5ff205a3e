#pragma once

// Independent reference implementations used only by the tests. They are
// deliberately naive: exhaustive enumeration, exact integer arithmetic.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "orbitlift/graph.hpp"
#include "orbitlift/rng.hpp"

namespace oracle {

using orbitlift::ObservedGraph;
using orbitlift::Permutation;

inline std::vector<Permutation> all_permutations(std::size_t n) {
  std::vector<std::size_t> m(n);
  std::iota(m.begin(), m.end(), std::size_t{0});
  std::vector<Permutation> out;
  do {
    out.emplace_back(m);
  } while (std::next_permutation(m.begin(), m.end()));
  return out;
}

inline bool is_automorphism(const Permutation& p, const ObservedGraph& g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g.at(p(i), p(j)) != g.at(i, j)) return false;
    }
  }
  return true;
}

inline std::vector<Permutation> automorphisms(const ObservedGraph& g) {
  std::vector<Permutation> out;
  for (auto& p : all_permutations(g.size())) {
    if (is_automorphism(p, g)) out.push_back(p);
  }
  return out;
}

inline bool isomorphic(const ObservedGraph& a, const ObservedGraph& b) {
  if (a.size() != b.size()) return false;
  for (auto& p : all_permutations(a.size())) {
    bool ok = true;
    for (std::size_t i = 0; i < a.size() && ok; ++i) {
      for (std::size_t j = 0; j < a.size() && ok; ++j) ok = b.at(p(i), p(j)) == a.at(i, j);
    }
    if (ok) return true;
  }
  return false;
}

/// pair_orbit[i][j] equal iff some automorphism maps one pair to the other.
inline std::vector<std::vector<std::size_t>> pair_orbits(const ObservedGraph& g) {
  const auto n = g.size();
  const auto auts = automorphisms(g);
  std::vector<std::vector<std::size_t>> id(n, std::vector<std::size_t>(n, SIZE_MAX));
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (id[i][j] != SIZE_MAX) continue;
      for (const auto& a : auts) id[a(i)][a(j)] = next;
      ++next;
    }
  }
  return id;
}

inline std::vector<std::size_t> node_orbits(const ObservedGraph& g) {
  const auto n = g.size();
  const auto auts = automorphisms(g);
  std::vector<std::size_t> id(n, SIZE_MAX);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (id[i] != SIZE_MAX) continue;
    for (const auto& a : auts) id[a(i)] = next;
    ++next;
  }
  return id;
}

inline ObservedGraph random_graph(orbitlift::Rng& rng, std::size_t n, bool directed, std::size_t alphabet,
                                  double density, bool attributes = false) {
  ObservedGraph g(n, directed, orbitlift::Alphabet(alphabet));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = directed ? 0 : i; j < n; ++j) {
      if (i == j && !attributes) continue;
      if (rng.uniform() < density) g.set(i, j, static_cast<orbitlift::EdgeValue>(1 + rng.below(alphabet - 1)));
    }
  }
  return g;
}

inline Permutation random_permutation(orbitlift::Rng& rng, std::size_t n) {
  std::vector<std::size_t> m(n);
  std::iota(m.begin(), m.end(), std::size_t{0});
  rng.shuffle(m);
  return Permutation(m);
}

inline ObservedGraph undirected(std::size_t n, std::initializer_list<std::pair<std::size_t, std::size_t>> edges) {
  ObservedGraph g(n, false);
  for (auto [i, j] : edges) g.set(i, j, 1);
  return g;
}

/// Exact binomial coefficient as an integer.
inline std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Two-sided Fisher p by enumerating every table with the same margins and
/// comparing integer weights C(r1,x) C(r2,c1-x) exactly.
inline double fisher_enumeration(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  const auto r1 = a + b, r2 = c + d, c1 = a + c;
  if (r1 + r2 == 0) return 1.0;
  const auto observed = choose(r1, a) * choose(r2, c);
  std::uint64_t tail = 0, total = 0;
  for (std::uint64_t x = 0; x <= std::min(r1, c1); ++x) {
    if (c1 - x > r2) continue;
    const auto w = choose(r1, x) * choose(r2, c1 - x);
    total += w;
    if (w <= observed) tail += w;
  }
  return static_cast<double>(tail) / static_cast<double>(total);
}

}  // namespace oracle
