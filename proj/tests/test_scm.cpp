#include <cmath>

#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "orbitlift/scm_checks.hpp"

using namespace orbitlift;
using fixtures::json;

namespace {

ScmSpec spec_of(const json& j) { return ScmSpec::from_json(j); }

json script_spec(json pairs, json values, int t0) {
  return {{"observation_time", t0},
          {"pair_mechanism", {{"type", "script"}, {"pairs", pairs}}},
          {"value_mechanism", {{"type", "script"}, {"values", values}}}};
}

}  // namespace

TEST_CASE("row-major pairs with ZERO values give the empty graph") {
  const auto spec = spec_of({{"pair_mechanism", {{"type", "row_major"}, {"nodes", 3}}},
                             {"value_mechanism", {{"type", "constant"}, {"value", 0}}}});
  const auto run = run_scm(spec, 4, 1);
  CHECK(run.graph.size() == 3);
  CHECK(run.graph.same_adjacency(ObservedGraph(3, false)));
  CHECK(run.log.size() == 4);
  CHECK(run.log.pairs.front() == NodePair{0, 0});
}

TEST_CASE("scripted triangle is a triangle under every relabelling") {
  // The value is forced off the diagonal so (0,0) does not carry an attribute.
  const auto spec = spec_of({{"pair_mechanism", {{"type", "script"}, {"pairs", {{0, 0}, {0, 1}, {1, 2}, {0, 2}}}}},
                             {"value_mechanism", {{"type", "offdiag"}, {"inner", {{"type", "constant"}, {"value", 1}}}}}});
  const auto k3 = fixtures::graph_of(3, fixtures::kTriangle);
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(run_scm(spec, 4, seed).graph.same_adjacency(k3));
}

TEST_CASE("latest value per pair wins") {
  const auto spec = spec_of(script_spec({{0, 0}, {0, 1}, {0, 1}}, {0, 1, 0}, 3));
  const auto run = run_scm(spec, 3, 5);
  CHECK(run.graph.at(run.pi(0), run.pi(1)) == kZero);
  const auto spec2 = spec_of(script_spec({{0, 0}, {0, 1}, {1, 0}}, {0, 0, 1}, 3));
  const auto run2 = run_scm(spec2, 3, 5);
  CHECK(run2.graph.at(run2.pi(0), run2.pi(1)) == 1);
}

TEST_CASE("latest-wins holds on random traces") {
  const auto spec = spec_of({{"alphabet", 3},
                             {"pair_mechanism", {{"type", "random_growth"}, {"max_nodes", 6}, {"p_new", 0.4}}},
                             {"value_mechanism", {{"type", "bernoulli"}, {"p", 0.5}, {"value", 2}}}});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto run = run_scm(spec, 15, seed);
    const auto n = run.graph.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        EdgeValue expected = kZero;
        for (std::size_t t = 0; t < run.log.size(); ++t) {
          const auto [a, b] = run.log.pairs[t];
          const bool hit = (run.pi(a) == i && run.pi(b) == j) || (run.pi(a) == j && run.pi(b) == i);
          if (hit) expected = run.log.values[t];
        }
        REQUIRE(run.graph.at(i, j) == expected);
      }
    }
  }
}

TEST_CASE("illegal pair emission") {
  const auto spec = spec_of(script_spec({{0, 0}, {0, 2}}, {1}, 2));
  CHECK_THROWS_WITH(run_scm(spec, 2, 0), "illegal pair emission at t=2");
  const auto first = spec_of(script_spec({{0, 1}}, {1}, 1));
  CHECK_THROWS_WITH(run_scm(first, 1, 0), "illegal pair emission at t=1");
  CHECK_THROWS_AS(run_scm(first, 0, 0), Error);
}

TEST_CASE("runs are deterministic in the seed") {
  const auto spec = spec_of({{"pair_mechanism", {{"type", "random_growth"}, {"max_nodes", 8}}},
                             {"value_mechanism", {{"type", "preferential_attachment"}}}});
  const auto a = run_scm(spec, 20, 42), b = run_scm(spec, 20, 42), c = run_scm(spec, 20, 43);
  CHECK(a.log == b.log);
  CHECK(a.graph == b.graph);
  CHECK(a.pi == b.pi);
  CHECK_FALSE(a.log == c.log);
}

TEST_CASE("config errors name the field") {
  json bad = {{"pair_mechanism", {{"type", "row_major"}, {"nodes", 3}}},
              {"value_mechanism", {{"type", "offdiag"}, {"inner", {{"type", "nope"}}}}}};
  CHECK_THROWS_WITH(ScmSpec::from_json(bad),
                    "config error at value_mechanism.inner.type: unknown value mechanism 'nope'");
  json prob = {{"pair_mechanism", {{"type", "row_major"}, {"nodes", 3}}},
               {"value_mechanism", {{"type", "bernoulli"}, {"p", 2}}}};
  CHECK_THROWS_WITH(ScmSpec::from_json(prob), "config error at value_mechanism.p: must be in [0, 1]");
  json extra = {{"colour", 1}};
  CHECK_THROWS_WITH(ScmSpec::from_json(extra), "config error at colour: unknown field");
}

TEST_CASE("deterministic common-neighbour probe") {
  const auto spec = spec_of(fixtures::frozen_graph(fixtures::kPath3, {{"type", "common_neighbors"}}));
  const auto run = run_scm(spec, 9);
  const auto& pi = run.pi;
  const auto t0 = spec.observation_time;
  CHECK(probe(spec, run.log, pi, {pi(0), pi(2)}, t0 + 1, 1).outcome == 1);
  CHECK(probe(spec, run.log, pi, {pi(0), pi(1)}, t0 + 1, 1).outcome == 0);
  CHECK_THROWS_WITH(probe(spec, run.log, pi, {0, 1}, t0, 1), "probe before observation");
  CHECK_THROWS_WITH(probe(spec, run.log, pi, {0, 7}, t0 + 1, 1), "probe pair out of range");
}

TEST_CASE("time-gap probes collapse to the next step") {
  const auto spec = spec_of(fixtures::frozen_graph(fixtures::kTwoEdges, {{"type", "bernoulli"}, {"p", 0.5}}));
  REQUIRE(spec.flags.time_gap);
  const auto run = run_scm(spec, 3);
  const auto t0 = spec.observation_time;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CHECK(probe(spec, run.log, run.pi, {0, 2}, t0 + 5, seed).outcome ==
          probe(spec, run.log, run.pi, {0, 2}, t0 + 1, seed).outcome);
  }
}

TEST_CASE("Bernoulli probe frequency") {
  const auto spec = spec_of(fixtures::frozen_graph(fixtures::kTwoEdges, {{"type", "bernoulli"}, {"p", 0.5}}));
  const auto run = run_scm(spec, 3);
  const int n = 10000;
  int ones = 0;
  for (int s = 0; s < n; ++s) ones += probe(spec, run.log, run.pi, {1, 3}, spec.observation_time + 1, s).outcome;
  CHECK(std::abs(ones - n / 2) < 3 * std::sqrt(n * 0.25));
}

TEST_CASE("single-element sequence equals probe") {
  const auto spec = spec_of(fixtures::frozen_graph(fixtures::kCycle4, {{"type", "bernoulli"}, {"p", 0.3}}));
  const auto run = run_scm(spec, 4);
  const auto t1 = spec.observation_time + 2;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto seq = probe_sequence(spec, run.log, run.pi, {{0, 2}}, {t1}, seed);
    REQUIRE(seq.records.size() == 1);
    CHECK(seq.records[0].outcome == probe(spec, run.log, run.pi, {0, 2}, t1, seed).outcome);
    CHECK(seq.base_graph == run.graph);
  }
  CHECK_THROWS_WITH(probe_sequence(spec, run.log, run.pi, {{0, 1}, {0, 2}}, {t1, t1}, 0),
                    "probe times must be strictly increasing");
}

namespace {

// Second-probe marginal in a two-probe sequence versus a lone probe.
double interference_p_value(const ScmSpec& spec, NodePair first, NodePair second) {
  const auto run = run_scm(spec, 8);
  const auto t0 = spec.observation_time;
  std::vector<std::uint64_t> seq(2, 0), lone(2, 0);
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto pi_first = NodePair{run.pi(first.first), run.pi(first.second)};
    const auto pi_second = NodePair{run.pi(second.first), run.pi(second.second)};
    ++seq[probe_sequence(spec, run.log, run.pi, {pi_first, pi_second}, {t0 + 1, t0 + 2}, s).records[1].outcome];
    ++lone[probe(spec, run.log, run.pi, pi_second, t0 + 1, derive_key(s, "lone")).outcome];
  }
  return chi_square_homogeneity({seq, lone}).p_value;
}

}  // namespace

TEST_CASE("non-interfering probes keep their lone marginal") {
  // Two disjoint paths; the first probe closes a triangle in one of them only.
  const auto spec = spec_of(fixtures::frozen_graph(
      {{0, 1}, {1, 2}, {3, 4}, {4, 5}}, {{"type", "distance_rates"}, {"rates", {{"1", 0.8}, {"2", 0.6}, {"inf", 0.1}}}}));
  CHECK(interference_p_value(spec, {0, 2}, {3, 5}) > 0.01);
}

TEST_CASE("interfering probes shift the second marginal") {
  const auto spec = spec_of(
      fixtures::frozen_graph(fixtures::kTwoEdges, {{"type", "global_links"}, {"rates", {0.2, 0.2, 0.2, 0.9}}}, false));
  CHECK(interference_p_value(spec, {0, 2}, {1, 3}) < 0.01);
}

TEST_CASE("exchangeability of a deterministic star") {
  const auto spec = spec_of({{"pair_mechanism", {{"type", "script"}, {"pairs", {{0, 0}, {0, 1}, {0, 2}}}}},
                             {"value_mechanism", {{"type", "offdiag"}, {"inner", {{"type", "constant"}, {"value", 1}}}}}});
  const std::size_t n = 30000;
  const auto report = check_exchangeability(spec, 3, n, 17);
  REQUIRE(report.classes.size() == 1);
  REQUIRE(report.rows.size() == 3);
  const double sigma = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (const auto& row : report.rows) {
    CHECK(row.expected == Catch::Approx(10000));
    CHECK(std::abs(static_cast<double>(row.count) - 10000.0) < 3 * sigma);
  }
  CHECK(report.passed());

  const auto control = check_exchangeability(spec, 3, n, 17, {false});
  CHECK_FALSE(control.passed());
}

TEST_CASE("exchangeability of the empty graph") {
  const auto spec = spec_of({{"pair_mechanism", {{"type", "row_major"}, {"nodes", 3}}},
                             {"value_mechanism", {{"type", "constant"}, {"value", 0}}}});
  const auto report = check_exchangeability(spec, 6, 200, 1);
  REQUIRE(report.classes.size() == 1);
  CHECK(report.classes[0].variants == 1);
  CHECK(report.passed());
}

TEST_CASE("small classes are skipped and counted") {
  const auto spec = spec_of({{"pair_mechanism", {{"type", "random_growth"}, {"max_nodes", 4}}},
                             {"value_mechanism", {{"type", "bernoulli"}, {"p", 0.5}}}});
  const auto report = check_exchangeability(spec, 5, 60, 3);
  CHECK(report.skipped_classes > 0);
}

TEST_CASE("mechanism invariance checks") {
  const auto cn = spec_of({{"observation_time", 10},
                           {"pair_mechanism", {{"type", "random_growth"}, {"max_nodes", 6}}},
                           {"value_mechanism", {{"type", "offdiag"}, {"inner", {{"type", "common_neighbors"}}}}}});
  CHECK(check_mechanism_invariance(cn, Invariance::time_exch, 200, 1).passed);
  CHECK(check_mechanism_invariance(cn, Invariance::nonlink_ign, 200, 1).passed);

  const auto constant = spec_of({{"observation_time", 6},
                                 {"pair_mechanism", {{"type", "random_growth"}, {"max_nodes", 5}}},
                                 {"value_mechanism", {{"type", "constant"}, {"value", 1}}}});
  for (auto f : {Invariance::time_gap, Invariance::time_exch, Invariance::nonlink_ign, Invariance::id_exch}) {
    CHECK(check_mechanism_invariance(constant, f, 100, 2).passed);
  }

  const auto raw = spec_of({{"observation_time", 8},
                            {"pair_mechanism", {{"type", "random_growth"}, {"max_nodes", 6}}},
                            {"value_mechanism", {{"type", "raw_id"}, {"rates", {0.95, 0.05}}}}});
  const auto report = check_mechanism_invariance(raw, Invariance::id_exch, 200, 3);
  REQUIRE_FALSE(report.passed);
  REQUIRE(report.counterexample);
  const auto& c = *report.counterexample;
  CHECK(c.outcome != c.transformed_outcome);
  CHECK(std::min(c.pair.first, c.pair.second) != std::min(c.transformed_pair.first, c.transformed_pair.second));
}

TEST_CASE("pair orbit keys agree with exact orbits") {
  const auto g = fixtures::graph_of(6, fixtures::kTwoTriangles);
  const auto orbits = oracle::pair_orbits(g);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      for (std::size_t u = 0; u < 6; ++u) {
        for (std::size_t v = 0; v < 6; ++v) {
          REQUIRE((pair_orbit_key(g, {i, j}) == pair_orbit_key(g, {u, v})) == (orbits[i][j] == orbits[u][v]));
        }
      }
    }
  }
}
