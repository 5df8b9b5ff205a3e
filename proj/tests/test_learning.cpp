#include <sstream>

#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "orbitlift/learning.hpp"

using namespace orbitlift;
using fixtures::json;

namespace {

double entropy(double p) { return -p * std::log(p) - (1 - p) * std::log(1 - p); }

json two_triangle_rates(double intra, double cross) {
  const auto g = fixtures::graph_of(6, fixtures::kTwoTriangles);
  return {{"type", "orbit_rates"},
          {"rates", {{pair_orbit_key(g, {0, 1}), intra}, {pair_orbit_key(g, {0, 4}), cross}}}};
}

std::vector<TrainingExample> orbit_targets(const ObservedGraph& g) {
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (i != j) out.push_back({{i, j}, g.at(i, j) != kZero ? 1.0 : 0.0, 1.0});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("MLP gradients match central differences") {
  Rng rng(41);
  for (auto loss : {LossKind::bce, LossKind::mse}) {
    const std::size_t d = 7;
    auto mlp = Mlp::initialised(d, d, 5);
    for (auto& w : mlp.params()) w += 0.3 * rng.normal();
    std::vector<Vector> xs(6, Vector(d));
    std::vector<double> ys(6);
    for (std::size_t m = 0; m < xs.size(); ++m) {
      for (auto& x : xs[m]) x = rng.normal();
      ys[m] = loss == LossKind::bce ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.normal();
    }
    auto total = [&](const Mlp& net) {
      double l = 0;
      for (std::size_t m = 0; m < xs.size(); ++m) l += net.loss(xs[m], ys[m], loss);
      return l;
    };
    std::vector<double> grad(mlp.params().size(), 0.0);
    for (std::size_t m = 0; m < xs.size(); ++m) mlp.accumulate(xs[m], ys[m], 1.0, loss, grad);
    const double h = 1e-6;
    for (int c = 0; c < 50; ++c) {
      const auto k = rng.below(grad.size());
      auto plus = mlp, minus = mlp;
      plus.params()[k] += h;
      minus.params()[k] -= h;
      const double fd = (total(plus) - total(minus)) / (2 * h);
      INFO(to_string(loss) << " coordinate " << k);
      CHECK(std::abs(grad[k] - fd) / std::max({std::abs(grad[k]), std::abs(fd), 1e-3}) < 1e-5);
    }
  }
}

TEST_CASE("zero-weight head predicts one half") {
  const auto g = fixtures::graph_of(6, fixtures::kTwoTriangles);
  const auto m = make_link_model(PairwiseEmbedding::labeled_wl(g), LossKind::bce);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) CHECK(predict(m, {i, j}) == 0.5);
  }
  CHECK_THROWS_WITH(predict(m, {0, 6}), "pair out of range");
}

TEST_CASE("separable orbit targets are fitted") {
  const auto g = fixtures::graph_of(6, fixtures::kTwoTriangles);
  TrainOptions o;
  o.epochs = 500;
  o.lr = 0.05;
  o.batch = 8;
  o.seed = 2;
  const auto r = train(make_link_model(PairwiseEmbedding::labeled_wl(g), LossKind::bce), orbit_targets(g), o);
  CHECK(r.report.losses.back() < 0.01);
  CHECK(r.report.losses[99] < r.report.losses[0]);
  CHECK(predict(r.model, {0, 1}) > 0.95);
  CHECK(predict(r.model, {0, 4}) < 0.05);

  const auto again = train(make_link_model(PairwiseEmbedding::labeled_wl(g), LossKind::bce), orbit_targets(g), o);
  CHECK(again.report.checksum == r.report.checksum);
  CHECK(again.report.losses == r.report.losses);
}

TEST_CASE("constant targets") {
  const auto g = fixtures::graph_of(4, fixtures::kCycle4);
  std::vector<TrainingExample> ex;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) ex.push_back({{i, j}, 1.0, 1.0});
  }
  TrainOptions o;
  o.epochs = 300;
  o.lr = 0.05;
  const auto r = train(make_link_model(PairwiseEmbedding::joint(g), LossKind::bce), ex, o);
  for (const auto& e : ex) CHECK(predict(r.model, e.pair) >= 0.99);
}

TEST_CASE("training errors") {
  const auto g = fixtures::graph_of(3, fixtures::kPath3);
  const auto m = make_link_model(PairwiseEmbedding::joint(g), LossKind::mse);
  CHECK_THROWS_WITH(train(m, std::vector<TrainingExample>{}, {}), "empty probe set");
  TrainOptions o;
  o.epochs = 5;
  CHECK_THROWS_WITH(train(m, std::vector<TrainingExample>{{{0, 1}, 1e300, 1.0}}, o), "training diverged");
  CHECK_THROWS_WITH(train(make_link_model(PairwiseEmbedding::joint(g), LossKind::bce),
                          std::vector<TrainingExample>{{{0, 1}, 2.0, 1.0}}, o),
                    "bce targets must lie in [0, 1]");
}

TEST_CASE("structural models are exactly orbit-consistent") {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = oracle::random_graph(rng, 7, false, 2, 0.4);
    std::vector<TrainingExample> ex;
    for (int m = 0; m < 30; ++m) ex.push_back({{rng.below(7), rng.below(7)}, rng.bernoulli(0.5) ? 1.0 : 0.0, 1.0});
    TrainOptions o;
    o.epochs = 20;
    o.seed = static_cast<std::uint64_t>(trial);
    for (auto emb : {PairwiseEmbedding::labeled_wl(g), PairwiseEmbedding::joint(g),
                     PairwiseEmbedding::nodes(wl_node_colors(g))}) {
      const auto model = train(make_link_model(emb, LossKind::bce), ex, o).model;
      const auto p = orbits(g);
      for (std::size_t a = 0; a < 49; ++a) {
        for (std::size_t b = 0; b < 49; ++b) {
          if (p.pair_orbit[a] == p.pair_orbit[b]) {
            REQUIRE(predict(model, {a / 7, a % 7}) == predict(model, {b / 7, b % 7}));
          }
        }
      }
    }
  }
}

TEST_CASE("node-colour model confuses node-wise isomorphic pairs") {
  const auto g = fixtures::graph_of(6, fixtures::kTwoTriangles);
  TrainOptions o;
  o.epochs = 200;
  const auto r = train(make_link_model(PairwiseEmbedding::nodes(wl_node_colors(g)), LossKind::bce), orbit_targets(g), o);
  CHECK(predict(r.model, {0, 1}) == predict(r.model, {0, 4}));
  // Best constant for 12 positives among 30 pairs.
  CHECK(predict(r.model, {0, 1}) == Catch::Approx(0.4).margin(0.02));
}

TEST_CASE("checkpoint round trip") {
  const auto g = fixtures::graph_of(6, fixtures::kTwoTriangles);
  TrainOptions o;
  o.epochs = 50;
  for (auto emb : {PairwiseEmbedding::labeled_wl(g), PairwiseEmbedding::joint(g),
                   PairwiseEmbedding::nodes(svd_embed(g, 3)), PairwiseEmbedding::nodes(one_hot_embed(g), true)}) {
    const auto model = train(make_link_model(emb, LossKind::bce), orbit_targets(g), o).model;
    std::stringstream ss;
    save_checkpoint(ss, model);
    const auto loaded = load_checkpoint(ss, g);
    CHECK(weights_checksum(loaded) == weights_checksum(model));
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) REQUIRE(predict(loaded, {i, j}) == predict(model, {i, j}));
    }
  }
  std::stringstream bad("nonsense");
  CHECK_THROWS_WITH(load_checkpoint(bad, g), "not a checkpoint file");
}

TEST_CASE("hits at k") {
  CHECK(hits_at_k({{{0, 1}, 0.9, true}, {{0, 2}, 0.8, false}, {{0, 3}, 0.7, true}}, 2) == 0.5);
  CHECK(hits_at_k({{{0, 1}, 0.9, true}, {{0, 2}, 0.8, true}, {{0, 3}, 0.1, false}}, 2) == 1.0);
  // Ties: lexicographically smaller pair first.
  CHECK(hits_at_k({{{1, 0}, 0.5, true}, {{0, 1}, 0.5, false}}, 1) == 0.0);
  Rng rng(47);
  std::vector<ScoredPair> s;
  for (std::size_t m = 0; m < 100; ++m) s.push_back({{m, 0}, rng.uniform(), m % 2 == 0});
  CHECK(hits_at_k(s, 100) == 0.5);
  CHECK_THROWS_WITH(hits_at_k(s, 101), "hits@k needs at least k scored pairs");
}

TEST_CASE("metrics csv") {
  std::ostringstream os;
  write_metrics_csv(os, {{"r1", "labeled_wl", "hits", 5, 0.8, 3}});
  CHECK(os.str() == "run_id,method,metric,k,value,seed\nr1,labeled_wl,hits,5,0.8,3\n");
}

TEST_CASE("embedding bias on the two-triangle fixture") {
  const auto spec = ScmSpec::from_json(fixtures::frozen_graph(fixtures::kTwoTriangles, two_triangle_rates(0.9, 0.1)));
  const auto pair = measure_bias(BiasEmbedding::labeled_wl, spec, 2000, 1);
  const auto node = measure_bias(BiasEmbedding::wl_node, spec, 2000, 1);
  CHECK(std::abs(pair.risk - entropy(0.9)) < 0.05);
  CHECK(node.risk > entropy(0.5) - 0.02);
  CHECK(node.risk - pair.risk >= 0.2);
  const auto hot = measure_bias(BiasEmbedding::one_hot, spec, 2000, 1);
  CHECK(hot.risk < pair.risk + 0.05);

  const auto flat = ScmSpec::from_json(fixtures::frozen_graph(fixtures::kTwoTriangles, two_triangle_rates(0.7, 0.7)));
  const auto gap = measure_bias(BiasEmbedding::wl_node, flat, 2000, 2).risk -
                   measure_bias(BiasEmbedding::labeled_wl, flat, 2000, 2).risk;
  CHECK(std::abs(gap) < 0.02);
}
