#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "orbitlift/graph.hpp"
#include "orbitlift/rng.hpp"

namespace orbitlift {

/// Colour refinement (1-WL) over an edge-value-labelled graph.
///
/// Colours are dense ranks 0..cells-1 whose order depends only on the
/// isomorphism type of the coloured graph, never on node ids. That makes the
/// ordered partition usable by the exact search routines: an isomorphism of
/// coloured graphs maps cell k onto cell k.
struct RefinedPartition {
  std::vector<std::uint32_t> color;
  std::uint32_t cells = 0;
  /// Hash of the signatures seen in every round. Isomorphic inputs give equal
  /// traces; unequal traces prove non-isomorphism.
  std::uint64_t trace = 0;

  bool discrete() const { return cells == color.size(); }
};

class ColorRefiner {
 public:
  explicit ColorRefiner(const ObservedGraph& g) : view_(g) {}

  std::size_t size() const { return view_.size(); }
  const AdjacencyView& view() const { return view_; }

  /// Initial colouring from node attributes (the diagonal).
  std::vector<std::uint32_t> attribute_colors() const {
    std::vector<std::uint32_t> c(view_.size());
    for (std::size_t v = 0; v < c.size(); ++v) c[v] = view_.label(v);
    return c;
  }

  /// Refines `initial` to the coarsest equitable partition finer than it.
  RefinedPartition refine(const std::vector<std::uint32_t>& initial) const {
    RefinedPartition p;
    p.trace = 0x6a09e667f3bcc908ULL;
    p.color = rank(initial, p.trace);
    p.cells = count_cells(p.color);
    for (;;) {
      auto next = round(p.color, p.trace);
      const auto cells = count_cells(next);
      p.color = std::move(next);
      if (cells == p.cells) break;
      p.cells = cells;
    }
    return p;
  }

  /// Gives v a colour of its own (ordered before the rest of its cell) and
  /// refines again.
  RefinedPartition individualize(const RefinedPartition& p, std::size_t v) const {
    std::vector<std::uint32_t> c(p.color.size());
    for (std::size_t u = 0; u < c.size(); ++u) c[u] = 2 * p.color[u] + (u == v ? 0 : 1);
    auto r = refine(c);
    r.trace = hash_combine(p.trace, r.trace);
    return r;
  }

 private:
  using Signature = std::vector<std::uint64_t>;

  static std::uint32_t count_cells(const std::vector<std::uint32_t>& c) {
    std::uint32_t m = 0;
    for (auto x : c) m = std::max(m, x + 1);
    return c.empty() ? 0 : m;
  }

  // Re-ranks arbitrary colour values densely, preserving their order.
  static std::vector<std::uint32_t> rank(const std::vector<std::uint32_t>& c, std::uint64_t& trace) {
    std::vector<std::uint32_t> vals(c);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    std::vector<std::uint32_t> out(c.size());
    for (std::size_t v = 0; v < c.size(); ++v) {
      out[v] = static_cast<std::uint32_t>(std::lower_bound(vals.begin(), vals.end(), c[v]) - vals.begin());
    }
    for (auto x : vals) trace = hash_combine(trace, x);
    std::vector<std::uint32_t> sizes(vals.size(), 0);
    for (auto x : out) ++sizes[x];
    for (auto s : sizes) trace = hash_combine(trace, s);
    return out;
  }

  std::vector<std::uint32_t> round(const std::vector<std::uint32_t>& color, std::uint64_t& trace) const {
    const auto n = view_.size();
    std::vector<Signature> sig(n);
    for (std::size_t v = 0; v < n; ++v) {
      auto& s = sig[v];
      s.reserve(view_.neighbors(v).size() + 1);
      s.push_back(color[v]);
      for (const auto& nb : view_.neighbors(v)) {
        s.push_back((static_cast<std::uint64_t>(color[nb.node]) << 16) |
                    (static_cast<std::uint64_t>(nb.out) << 8) | nb.in);
      }
      std::sort(s.begin() + 1, s.end());
    }
    std::vector<std::size_t> order(n);
    for (std::size_t v = 0; v < n; ++v) order[v] = v;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sig[a] < sig[b]; });
    std::vector<std::uint32_t> out(n);
    std::uint32_t next = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const bool fresh = k == 0 || sig[order[k]] != sig[order[k - 1]];
      if (fresh) {
        if (k > 0) ++next;
        for (auto x : sig[order[k]]) trace = hash_combine(trace, x);
        trace = hash_combine(trace, 0xffffffffULL);
      }
      trace = hash_combine(trace, next);
      out[order[k]] = next;
    }
    trace = hash_combine(trace, next);
    return out;
  }

  AdjacencyView view_;
};

/// Hashed 1-WL colours for large graphs. Round 0 holds the initial hashes;
/// each later round hashes (own colour, sorted multiset of (out, in,
/// neighbour colour)). With `iterations < 0` rounds continue until the number
/// of distinct colours stops growing.
inline std::vector<std::vector<std::uint64_t>> wl_hash_rounds(const AdjacencyView& view,
                                                               std::vector<std::uint64_t> initial,
                                                               int iterations) {
  const auto n = view.size();
  auto distinct = [](std::vector<std::uint64_t> vals) {
    std::sort(vals.begin(), vals.end());
    return static_cast<std::size_t>(std::unique(vals.begin(), vals.end()) - vals.begin());
  };
  std::vector<std::vector<std::uint64_t>> rounds{std::move(initial)};
  std::size_t classes = distinct(rounds.back());
  std::vector<std::uint64_t> items;
  const int limit = iterations < 0 ? static_cast<int>(n) + 1 : iterations;
  for (int r = 0; r < limit; ++r) {
    std::vector<std::uint64_t> next(n, 0);
    {
      const auto& cur = rounds.back();
      for (std::size_t v = 0; v < n; ++v) {
        items.clear();
        for (const auto& nb : view.neighbors(v)) {
          items.push_back(hash_combine(hash_combine(cur[nb.node], nb.out), nb.in));
        }
        std::sort(items.begin(), items.end());
        std::uint64_t h = hash_combine(0x243f6a8885a308d3ULL, cur[v]);
        for (auto x : items) h = hash_combine(h, x);
        next[v] = h;
      }
    }
    const auto c = distinct(next);
    rounds.push_back(std::move(next));
    if (iterations < 0 && c == classes) break;
    classes = c;
  }
  return rounds;
}

}  // namespace orbitlift
