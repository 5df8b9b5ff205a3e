#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "orbitlift/isomorphism.hpp"

using namespace orbitlift;

namespace {

ObservedGraph star(std::size_t center, std::size_t n) {
  ObservedGraph g(n, false);
  for (std::size_t v = 0; v < n; ++v) {
    if (v != center) g.set(center, v, 1);
  }
  return g;
}

}  // namespace

TEST_CASE("graphs_isomorphic fixtures") {
  const auto k3 = oracle::undirected(3, {{0, 1}, {1, 2}, {0, 2}});
  const auto w = graphs_isomorphic(k3, k3);
  REQUIRE(w);
  CHECK(apply_permutation(*w, k3) == k3);

  const auto p3 = oracle::undirected(3, {{0, 1}, {1, 2}});
  const auto p3b = oracle::undirected(3, {{1, 0}, {0, 2}});
  REQUIRE(oracle::isomorphic(p3, p3b));
  const auto wp = graphs_isomorphic(p3, p3b);
  REQUIRE(wp);
  CHECK(apply_permutation(*wp, p3) == p3b);

  CHECK_FALSE(graphs_isomorphic(p3, k3));
}

TEST_CASE("size limit") {
  ObservedGraph big(13, false);
  CHECK_THROWS_WITH(canonical_form(big), "instance too large for exact isomorphism");
  CHECK_THROWS_WITH(graphs_isomorphic(big, big), "instance too large for exact isomorphism");
  CHECK_NOTHROW(canonical_form(big, 13));
}

TEST_CASE("canonical_form fixtures") {
  CHECK(canonical_form(star(0, 4)) == canonical_form(star(2, 4)));
  CHECK(oracle::isomorphic(star(0, 4), star(2, 4)));
  const auto p3 = oracle::undirected(3, {{0, 1}, {1, 2}});
  const auto k3 = oracle::undirected(3, {{0, 1}, {1, 2}, {0, 2}});
  CHECK(canonical_form(p3) != canonical_form(k3));
  const ObservedGraph empty(3, false);
  CHECK(canonical_form(empty) == empty.serialize());
}

TEST_CASE("canonical_form is constant on relabelling orbits") {
  Rng rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    const auto n = 1 + rng.below(8);
    const bool directed = rng.bernoulli(0.3);
    const auto g = oracle::random_graph(rng, n, directed, 2 + rng.below(2), rng.uniform(0.2, 0.8), rng.bernoulli(0.3));
    const auto c = canonical_form_with_labeling(g);
    CHECK(apply_permutation(c.labeling, g).serialize() == c.bytes);
    const auto h = apply_permutation(oracle::random_permutation(rng, n), g);
    CHECK(canonical_form(h) == c.bytes);
    const auto w = graphs_isomorphic(g, h);
    REQUIRE(w);
    CHECK(apply_permutation(*w, g).same_adjacency(h));
  }
}

TEST_CASE("canonical_form separates exactly the isomorphism classes") {
  Rng rng(5);
  std::vector<ObservedGraph> graphs;
  for (int k = 0; k < 40; ++k) graphs.push_back(oracle::random_graph(rng, 5, false, 2, 0.5));
  for (std::size_t a = 0; a < graphs.size(); ++a) {
    for (std::size_t b = a + 1; b < graphs.size(); ++b) {
      CHECK((canonical_form(graphs[a]) == canonical_form(graphs[b])) == oracle::isomorphic(graphs[a], graphs[b]));
    }
  }
}

TEST_CASE("regular graphs that colour refinement cannot split") {
  // C6 versus two disjoint triangles: both 2-regular on 6 nodes.
  const auto c6 = oracle::undirected(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}});
  const auto tt = oracle::undirected(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  CHECK(canonical_form(c6) != canonical_form(tt));
  CHECK_FALSE(graphs_isomorphic(c6, tt));
  Rng rng(2);
  const auto relabelled = apply_permutation(oracle::random_permutation(rng, 6), c6);
  CHECK(canonical_form(relabelled) == canonical_form(c6));
  const ObservedGraph empty(12, false);
  CHECK(canonical_form(empty) == empty.serialize());
}
