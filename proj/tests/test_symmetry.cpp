#include <set>

#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "orbitlift/lifting.hpp"
#include "orbitlift/symmetry.hpp"

using namespace orbitlift;
using fixtures::json;

namespace {

// Closure of the generators as an explicit set (small groups only).
std::set<std::vector<std::size_t>> generated(const AutomorphismGroup& group, std::size_t n) {
  std::set<std::vector<std::size_t>> seen{Permutation::identity(n).mapping()};
  std::vector<Permutation> frontier{Permutation::identity(n)};
  while (!frontier.empty()) {
    auto p = frontier.back();
    frontier.pop_back();
    for (const auto& g : group.generators) {
      auto q = compose(g, p);
      if (seen.insert(q.mapping()).second) frontier.push_back(q);
    }
  }
  return seen;
}

}  // namespace

TEST_CASE("automorphism group fixtures") {
  CHECK(automorphism_group(fixtures::graph_of(3, fixtures::kTriangle)).order == 6);
  CHECK(oracle::automorphisms(fixtures::graph_of(3, fixtures::kTriangle)).size() == 6);

  const auto p3 = fixtures::graph_of(3, fixtures::kPath3);
  const auto gp = automorphism_group(p3);
  CHECK(gp.order == 2);
  REQUIRE(gp.generators.size() == 1);
  CHECK(gp.generators[0] == Permutation({2, 1, 0}));

  // Triangle 0-1-2 with pendant paths of lengths 1, 2, 3 would need 9 nodes;
  // the 6-node version hangs paths of lengths 1 and 2 on two corners.
  const auto asym = fixtures::graph_of(6, {{0, 1}, {1, 2}, {0, 2}, {0, 3}, {1, 4}, {4, 5}});
  CHECK(oracle::automorphisms(asym).size() == 1);
  CHECK(automorphism_group(asym).order == 1);
  CHECK(automorphism_group(asym).generators.empty());

  CHECK(automorphism_group(fixtures::graph_of(6, fixtures::kTwoTriangles)).order == 72);
}

TEST_CASE("large symmetric groups and the size limit") {
  const ObservedGraph empty(20, false);
  const auto g = automorphism_group(empty);
  CHECK(g.order_string() == "2432902008176640000");
  for (const auto& a : g.generators) CHECK(oracle::is_automorphism(a, empty));
  CHECK_THROWS_WITH(automorphism_group(ObservedGraph(65, false)), "graph too large for exact automorphism search");
  const ObservedGraph empty64(64, false);
  CHECK(automorphism_group(empty64).order_string() ==
        "126886932185884164103433389335161480802865516174545192198801894375214704230400000000000000");
}

TEST_CASE("automorphism search matches brute force on random graphs") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + rng.below(7);
    const bool directed = rng.bernoulli(0.3);
    const auto g = oracle::random_graph(rng, n, directed, 2 + rng.below(2), rng.uniform(0.1, 0.9), rng.bernoulli(0.2));
    const auto group = automorphism_group(g);
    const auto brute = oracle::automorphisms(g);
    REQUIRE(group.order == brute.size());
    for (const auto& a : group.generators) REQUIRE(oracle::is_automorphism(a, g));
    CHECK(generated(group, n).size() == brute.size());
    const auto p = orbits(g, group);
    const auto pairs = oracle::pair_orbits(g);
    const auto nodes = oracle::node_orbits(g);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t u = 0; u < n; ++u) REQUIRE((p.node_orbit[i] == p.node_orbit[u]) == (nodes[i] == nodes[u]));
    }
    for (std::size_t a = 0; a < n * n; ++a) {
      for (std::size_t b = 0; b < n * n; ++b) {
        REQUIRE((p.pair_orbit[a] == p.pair_orbit[b]) == (pairs[a / n][a % n] == pairs[b / n][b % n]));
      }
    }
  }
}

TEST_CASE("orbit fixtures") {
  const auto k3 = orbits(fixtures::graph_of(3, fixtures::kTriangle));
  CHECK(k3.node_orbit_count == 1);
  CHECK(k3.pair_orbit_count == 2);
  CHECK(k3.pair(0, 0) == k3.pair(2, 2));
  CHECK(k3.pair(0, 1) == k3.pair(2, 0));
  CHECK(k3.pair(0, 0) != k3.pair(0, 1));

  const auto p3 = orbits(fixtures::graph_of(3, fixtures::kPath3));
  CHECK(p3.node_orbit[0] == p3.node_orbit[2]);
  CHECK(p3.node_orbit[0] != p3.node_orbit[1]);
  const auto members = p3.pair_members(p3.pair(0, 1));
  CHECK(members == std::vector<NodePair>{{0, 1}, {2, 1}});

  const auto e4 = orbits(ObservedGraph(4, false));
  CHECK(e4.node_orbit_count == 1);
  CHECK(e4.pair_orbit_count == 2);
}

TEST_CASE("pair orbits are conjugated by relabelling") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 2 + rng.below(6);
    const auto g = oracle::random_graph(rng, n, false, 2, 0.5);
    const auto p = oracle::random_permutation(rng, n);
    const auto a = orbits(g), b = orbits(apply_permutation(p, g));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t u = 0; u < n; ++u) {
          for (std::size_t v = 0; v < n; ++v) {
            REQUIRE((a.pair(i, j) == a.pair(u, v)) == (b.pair(p(i), p(j)) == b.pair(p(u), p(v))));
          }
        }
      }
    }
  }
}

TEST_CASE("pair orbits refine node orbits") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 2 + rng.below(6);
    const auto p = orbits(oracle::random_graph(rng, n, rng.bernoulli(0.5), 3, 0.4));
    for (std::size_t a = 0; a < n * n; ++a) {
      for (std::size_t b = 0; b < n * n; ++b) {
        if (p.pair_orbit[a] != p.pair_orbit[b]) continue;
        REQUIRE(p.node_orbit[a / n] == p.node_orbit[b / n]);
        REQUIRE(p.node_orbit[a % n] == p.node_orbit[b % n]);
      }
    }
  }
}

TEST_CASE("pairwise symmetric graphs") {
  const auto tt = fixtures::graph_of(6, fixtures::kTwoTriangles);
  const auto w = is_pairwise_symmetric(tt);
  REQUIRE(w);
  const auto p = orbits(tt);
  CHECK(is_valid_witness(p, *w));
  CHECK(is_valid_witness(p, {0, 1, 0, 4}));
  CHECK_FALSE(is_pairwise_symmetric(fixtures::graph_of(3, fixtures::kTriangle)));
  CHECK_FALSE(is_pairwise_symmetric(fixtures::graph_of(2, {{0, 1}})));
}

TEST_CASE("orbit MAP estimator") {
  const auto g = fixtures::graph_of(3, fixtures::kPath3);
  const auto p = orbits(g);
  ProbeSequence probes;
  probes.base_graph = g;
  probes.records = {{{0, 1}, 2, 1}, {{2, 1}, 3, 1}, {{0, 1}, 4, 0}};
  const auto est = orbit_map_estimator(probes, p, {1, 1});
  const auto o = p.pair(0, 1);
  CHECK(est[o].observed);
  CHECK(est[o].probabilities[1] == Catch::Approx(2.0 / 3));
  const auto unobserved = p.pair(0, 2);
  CHECK_FALSE(est[unobserved].observed);
  CHECK(est[unobserved].probabilities[1] == Catch::Approx(0.5));

  probes.records.assign(5, {{1, 0}, 2, 1});
  CHECK(orbit_map_estimator(probes, p, {1, 1})[p.pair(1, 0)].probabilities[1] == Catch::Approx(1.0));
}

TEST_CASE("orbit MAP estimator converges on an orbit-keyed process") {
  const auto g = fixtures::graph_of(4, fixtures::kCycle4);
  const auto key = pair_orbit_key(g, {0, 1});
  const auto spec = ScmSpec::from_json(
      fixtures::frozen_graph(fixtures::kCycle4, {{"type", "orbit_rates"}, {"rates", {{key, 0.3}}}}));
  const auto run = run_scm(spec, 5);
  const auto p = orbits(run.graph);
  std::vector<NodePair> pairs;
  std::vector<std::int64_t> times;
  const auto members = p.pair_members(p.pair(run.pi(0), run.pi(1)));
  for (int m = 0; m < 1000; ++m) {
    pairs.push_back(members[m % members.size()]);
    times.push_back(spec.observation_time + 1 + m);
  }
  const auto probes = probe_sequence(spec, run.log, run.pi, pairs, times, 77);
  const auto est = orbit_map_estimator(probes, p, {1, 1});
  CHECK(std::abs(est[p.pair(members[0])].probabilities[1] - 0.3) < 0.05);
}

namespace {

struct Fixture {
  ScmSpec spec;
  ScmRun run;
};

Fixture make(const std::vector<NodePair>& edges, const json& after, bool flags = true) {
  Fixture f{ScmSpec::from_json(fixtures::frozen_graph(edges, after, flags)), {}};
  f.run = run_scm(f.spec, 21);
  return f;
}

}  // namespace

TEST_CASE("interventional lifting: orbit-keyed outcomes pass") {
  const auto g = fixtures::graph_of(6, fixtures::kTwoTriangles);
  json rates = {{pair_orbit_key(g, {0, 1}), 0.9}, {pair_orbit_key(g, {0, 4}), 0.1}};
  auto f = make(fixtures::kTwoTriangles, {{"type", "orbit_rates"}, {"rates", rates}});
  for (NodePair q : {NodePair{0, 1}, NodePair{0, 4}}) {
    const auto obs = NodePair{f.run.pi(q.first), f.run.pi(q.second)};
    const auto r = check_interventional_lifting(f.spec, f.run.graph, f.run.pi, f.run.log, obs, 2000, 5);
    CHECK(r.passed);
    CHECK(r.members.size() == (q == NodePair{0, 1} ? 12u : 18u));
  }
}

TEST_CASE("interventional lifting: raw id reader is rejected") {
  auto f = make(fixtures::kTwoTriangles, {{"type", "raw_id"}, {"rates", {0.9, 0.1}}}, false);
  const auto obs = NodePair{f.run.pi(0), f.run.pi(1)};
  const auto r = check_interventional_lifting(f.spec, f.run.graph, f.run.pi, f.run.log, obs, 2000, 5);
  CHECK_FALSE(r.passed);
}

TEST_CASE("interventional lifting: deterministic mechanism has zero variance") {
  auto f = make(fixtures::kPath3, {{"type", "common_neighbors"}});
  const auto obs = NodePair{f.run.pi(0), f.run.pi(1)};
  const auto r = check_interventional_lifting(f.spec, f.run.graph, f.run.pi, f.run.log, obs, 200, 5);
  CHECK(r.passed);
  CHECK(r.min_p_value == 1.0);
  for (const auto& h : r.histograms) CHECK(h[0] == 200);
}

TEST_CASE("interventional lifting: trivial orbit") {
  auto f = make({{0, 1}, {1, 2}, {0, 2}, {0, 3}, {1, 4}, {4, 5}}, {{"type", "bernoulli"}, {"p", 0.5}});
  CHECK_THROWS_WITH(check_interventional_lifting(f.spec, f.run.graph, f.run.pi, f.run.log, {0, 1}, 10, 1),
                    "lifting vacuous: trivial orbit");
}

TEST_CASE("counterfactual lifting: independent draws collapse to the marginal") {
  auto f = make(fixtures::kTwoEdges, {{"type", "bernoulli"}, {"p", 0.3}});
  const auto& pi = f.run.pi;
  const ProbeRecord evidence{{pi(0), pi(1)}, f.spec.observation_time + 1, 1};
  const auto query = NodePair{pi(0), pi(2)};
  const auto cf = check_counterfactual_lifting(f.spec, f.run.graph, pi, f.run.log, query, evidence, 20000, 3);
  CHECK(cf.passed);
  CHECK(cf.members.size() == 2);
  const auto iv = check_interventional_lifting(f.spec, f.run.graph, pi, f.run.log, {pi(0), pi(2)}, 5000, 4);
  CHECK(std::abs(cf.pooled_rate() - iv.pooled_rate()) < 0.03);
  CHECK(std::abs(cf.pooled_rate() - 0.3) < 0.03);
}

TEST_CASE("counterfactual lifting: shared latent matches the Bayes posterior") {
  auto f = make(fixtures::kTwoEdges, {{"type", "latent_mixture"}, {"weights", {0.5, 0.5}}, {"rates", {0.8, 0.2}}});
  const auto& pi = f.run.pi;
  const ProbeRecord evidence{{pi(0), pi(1)}, f.spec.observation_time + 1, 1};
  const auto cf =
      check_counterfactual_lifting(f.spec, f.run.graph, pi, f.run.log, {pi(0), pi(2)}, evidence, 30000, 8);
  const double oracle = (0.5 * 0.8 * 0.8 + 0.5 * 0.2 * 0.2) / (0.5 * 0.8 + 0.5 * 0.2);
  CHECK(cf.passed);
  CHECK(std::abs(cf.pooled_rate() - oracle) < 0.03);
  CHECK(cf.accepted > 0);
}

TEST_CASE("counterfactual lifting: improbable evidence") {
  auto f = make(fixtures::kTwoEdges, {{"type", "bernoulli"}, {"p", 0.0}});
  const auto& pi = f.run.pi;
  const ProbeRecord evidence{{pi(0), pi(1)}, f.spec.observation_time + 1, 1};
  CHECK_THROWS_WITH(check_counterfactual_lifting(f.spec, f.run.graph, pi, f.run.log, {pi(0), pi(2)}, evidence, 500, 1),
                    "evidence too improbable for rejection sampling");
}
