#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "orbitlift/error.hpp"
#include "orbitlift/learning.hpp"
#include "orbitlift/parallel.hpp"
#include "orbitlift/rng.hpp"
#include "orbitlift/stats.hpp"

namespace orbitlift::tasks {

struct SimilarityOptions {
  std::size_t k_neighbors = 10;
  double alpha = 0.05;
  unsigned threads = 1;
};

struct SimilarityReport {
  double similar_rate = 0;  // share of non-rejections, nearest pairing
  double random_rate = 0;   // share of non-rejections, random pairing
  std::size_t tested = 0;
  std::size_t skipped = 0;  // pairings without k disjoint neighbours each
};

namespace detail {

inline double squared_distance(const Vector& a, const Vector& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// Outcome counts of the k nearest neighbours of p and of q. A candidate goes
// to the closer of the two; exact ties alternate between them, since orbit
// mates under a structural encoder are all at distance zero from both.
// Returns false when either side ends up with fewer than k.
inline bool neighbour_table(const std::vector<Vector>& x, const std::vector<bool>& y, std::size_t p, std::size_t q,
                            std::size_t k, ContingencyTable2x2& table) {
  std::vector<std::pair<double, std::size_t>> mine, theirs;
  bool toggle = false;
  for (std::size_t c = 0; c < x.size(); ++c) {
    if (c == p || c == q) continue;
    const double dp = squared_distance(x[c], x[p]), dq = squared_distance(x[c], x[q]);
    bool to_p = dp < dq;
    if (dp == dq) {
      to_p = !toggle;
      toggle = !toggle;
    }
    (to_p ? mine : theirs).push_back({to_p ? dp : dq, c});
  }
  if (mine.size() < k || theirs.size() < k) return false;
  auto take = [&](std::vector<std::pair<double, std::size_t>>& v, std::uint64_t& pos, std::uint64_t& neg) {
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    for (std::size_t m = 0; m < k; ++m) (y[v[m].second] ? pos : neg) += 1;
  };
  table = {};
  take(mine, table.a, table.b);
  take(theirs, table.c, table.d);
  return true;
}

}  // namespace detail

/// For each probe, pairs it with its nearest probe in the model's feature
/// space and with a uniformly random probe, builds a 2x2 table of the two
/// neighbourhoods' outcomes (rows: probe side, columns: link / no link) and
/// runs the Fisher exact test. Reports the non-rejection rates.
inline SimilarityReport structural_similarity_test(const LinkModel& model, const std::vector<ProbeRecord>& probes,
                                                   std::uint64_t seed, const SimilarityOptions& o = {}) {
  const auto n = probes.size();
  if (n < 2 * o.k_neighbors + 2) throw Error("not enough probes for the neighbour test");
  std::vector<Vector> x(n);
  std::vector<bool> y(n);
  for (std::size_t m = 0; m < n; ++m) {
    x[m] = model.features(probes[m].pair.first, probes[m].pair.second);
    y[m] = probes[m].outcome != kZero;
  }
  std::vector<int> similar(n, -1), random(n, -1);  // -1 skipped, 0 rejected, 1 kept
  parallel_for(n, o.threads, [&](std::size_t p) {
    // Nearest probe on a different pair; lowest index on ties.
    std::size_t nearest = n;
    double best = 0;
    for (std::size_t c = 0; c < n; ++c) {
      if (probes[c].pair == probes[p].pair) continue;
      const double d = detail::squared_distance(x[p], x[c]);
      if (nearest == n || d < best) {
        best = d;
        nearest = c;
      }
    }
    if (nearest == n) return;
    Rng rng(derive_key(seed, "similarity", {p}));
    std::size_t other = rng.below(n - 1);
    if (other >= p) ++other;
    ContingencyTable2x2 t;
    if (detail::neighbour_table(x, y, p, nearest, o.k_neighbors, t)) similar[p] = fisher_exact(t) > o.alpha;
    if (detail::neighbour_table(x, y, p, other, o.k_neighbors, t)) random[p] = fisher_exact(t) > o.alpha;
  });
  SimilarityReport r;
  std::size_t similar_kept = 0, random_kept = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (similar[p] < 0 || random[p] < 0) {
      ++r.skipped;
      continue;
    }
    ++r.tested;
    similar_kept += static_cast<std::size_t>(similar[p]);
    random_kept += static_cast<std::size_t>(random[p]);
  }
  if (r.tested) {
    r.similar_rate = static_cast<double>(similar_kept) / static_cast<double>(r.tested);
    r.random_rate = static_cast<double>(random_kept) / static_cast<double>(r.tested);
  }
  return r;
}

}  // namespace orbitlift::tasks
