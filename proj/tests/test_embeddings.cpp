#include <Eigen/Dense>

#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "orbitlift/embeddings.hpp"

using namespace orbitlift;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  }
  return e;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  double d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

// Same partition of nodes, regardless of colour names.
template <class A, class B>
bool same_partition(const std::vector<A>& a, const std::vector<B>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

ObservedGraph undirected_from_mask(std::size_t n, unsigned mask) {
  ObservedGraph g(n, false);
  unsigned bit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++bit) {
      if (mask & (1u << bit)) g.set(i, j, 1);
    }
  }
  return g;
}

}  // namespace

TEST_CASE("jacobi eigendecomposition matches a reference solver") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = 1 + rng.below(9);
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform(-2, 2);
    }
    const auto mine = jacobi_eigen(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(m));
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(mine.values[k] == Catch::Approx(ref.eigenvalues()(n - 1 - k)).margin(1e-9));
    }
    // V diag(lambda) V^T reproduces the input.
    Matrix d(n, n);
    for (std::size_t k = 0; k < n; ++k) d(k, k) = mine.values[k];
    CHECK((mine.vectors * d * mine.vectors.transpose() - m).frobenius() < 1e-9);
  }
}

TEST_CASE("svd reconstructs at full rank") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = 2 + rng.below(8);
    const auto g = oracle::random_graph(rng, n, rng.bernoulli(0.5), 4, 0.4, true);
    const auto a = numeric_adjacency(g);
    const auto s = svd(a);
    Matrix rebuilt(n, n);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) rebuilt(i, j) += s.singular_values[k] * s.left(i, k) * s.right(j, k);
      }
    }
    CHECK((rebuilt - a).frobenius() < 1e-8);
    Eigen::JacobiSVD<Eigen::MatrixXd> ref(to_eigen(a));
    for (std::size_t k = 0; k < n; ++k) CHECK(s.singular_values[k] == Catch::Approx(ref.singularValues()(k)).margin(1e-8));
    // Embedding rows [sigma V | sigma U] reproduce a as U Sigma V^T too.
    const auto t = svd_embed(g, n);
    Matrix from_rows(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          if (s.singular_values[k] > 0) from_rows(i, j) += t.rows[i][n + k] * t.rows[j][k] / s.singular_values[k];
        }
      }
    }
    CHECK((from_rows - a).frobenius() < 1e-8);
  }
  CHECK_THROWS_WITH(svd_embed(ObservedGraph(3, false), 4), "SVD rank must be in [1, n]");
}

TEST_CASE("svd embedding fixtures") {
  const auto star = fixtures::graph_of(4, fixtures::kStar3);
  const auto t = svd_embed(star, 4);
  CHECK(max_abs_diff(t.rows[1], t.rows[2]) < 1e-9);
  CHECK(max_abs_diff(t.rows[1], t.rows[3]) < 1e-9);
  const auto r = svd_invariance_check(star);
  CHECK(r.agrees());
  CHECK(r.equal_pairs == std::vector<NodePair>{{1, 2}, {1, 3}, {2, 3}});

  // Two disjoint edges: 0 and 2 are isomorphic but see different neighbours.
  const auto two = fixtures::graph_of(4, fixtures::kTwoEdges);
  const auto r2 = svd_invariance_check(two);
  CHECK(r2.agrees());
  CHECK(r2.equal_pairs.empty());
  // Reference: projector onto the eigenvalue-1 eigenspace of a^T a, which is
  // the whole space here, so equality must come from the a^T a spectrum alone.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(numeric_adjacency(two)));
  Eigen::MatrixXd v = ref.eigenvectors();
  bool rows_equal = true;
  for (int k = 0; k < 4; ++k) rows_equal &= std::abs(v(0, k) - v(2, k)) < 1e-9;
  CHECK_FALSE(rows_equal);

  const auto asym = fixtures::graph_of(6, {{0, 1}, {1, 2}, {0, 2}, {0, 3}, {1, 4}, {4, 5}});
  CHECK(svd_invariance_check(asym).equal_pairs.empty());
}

TEST_CASE("svd invariance checker agrees with the neighbourhood predicate on all 4-node graphs") {
  std::size_t equal = 0;
  for (unsigned mask = 0; mask < 64; ++mask) {
    const auto r = svd_invariance_check(undirected_from_mask(4, mask));
    INFO("mask " << mask);
    CHECK(r.agrees());
    equal += r.equal_pairs.size();
  }
  CHECK(equal > 0);
}

TEST_CASE("svd invariance checker agrees on random graphs") {
  Rng rng(17);
  for (int trial = 0; trial < 150; ++trial) {
    const auto n = 1 + rng.below(7);
    const auto g = oracle::random_graph(rng, n, rng.bernoulli(0.3), 2, rng.uniform(0.1, 0.8));
    REQUIRE(svd_invariance_check(g).agrees());
  }
}

TEST_CASE("WL node colours") {
  const auto k3 = wl_node_colors(fixtures::graph_of(3, fixtures::kTriangle));
  CHECK(k3.colors[0] == k3.colors[1]);
  CHECK(k3.colors[1] == k3.colors[2]);
  const auto p3 = wl_node_colors(fixtures::graph_of(3, fixtures::kPath3));
  CHECK(p3.colors[0] == p3.colors[2]);
  CHECK(p3.colors[0] != p3.colors[1]);
  CHECK(p3.rows[0] == p3.rows[2]);
  CHECK(p3.rows[0] != p3.rows[1]);
  const auto tt = wl_node_colors(fixtures::graph_of(6, fixtures::kTwoTriangles));
  for (std::size_t v = 1; v < 6; ++v) CHECK(tt.colors[v] == tt.colors[0]);
}

TEST_CASE("hashed WL reaches the exact stable partition") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + rng.below(12);
    const auto g = oracle::random_graph(rng, n, rng.bernoulli(0.4), 3, rng.uniform(0.1, 0.6), rng.bernoulli(0.3));
    const ColorRefiner refiner(g);
    const auto exact = refiner.refine(refiner.attribute_colors());
    REQUIRE(same_partition(wl_node_colors(g).colors, exact.color));
  }
}

TEST_CASE("structural encoders are invariant under relabelling") {
  Rng rng(29);
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = 2 + rng.below(7);
    const auto g = oracle::random_graph(rng, n, rng.bernoulli(0.4), 3, 0.4, rng.bernoulli(0.3));
    const auto p = oracle::random_permutation(rng, n);
    const auto h = apply_permutation(p, g);
    const auto wl_g = wl_node_colors(g), wl_h = wl_node_colors(h);
    const LabeledWl lg(g), lh(h);
    const JointFeatures jg(g), jh(h);
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(wl_g.rows[i] == wl_h.rows[p(i)]);
      for (std::size_t j = 0; j < n; ++j) {
        REQUIRE(lg(i, j) == lh(p(i), p(j)));
        REQUIRE(jg(i, j) == jh(p(i), p(j)));
      }
    }
  }
}

TEST_CASE("structural pair encoders are constant on pair orbits") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = 2 + rng.below(6);
    const auto g = oracle::random_graph(rng, n, false, 2, 0.45);
    const auto p = orbits(g);
    const LabeledWl wl(g);
    const JointFeatures joint(g);
    for (std::size_t a = 0; a < n * n; ++a) {
      for (std::size_t b = 0; b < n * n; ++b) {
        if (p.pair_orbit[a] != p.pair_orbit[b]) continue;
        REQUIRE(wl(a / n, a % n) == wl(b / n, b % n));
        REQUIRE(joint(a / n, a % n) == joint(b / n, b % n));
      }
    }
  }
}

TEST_CASE("labeling trick separates what node colours cannot") {
  const auto g = fixtures::graph_of(6, fixtures::kTwoTriangles);
  const auto intra = pairwise_labeled_wl(g, {0, 1}), cross = pairwise_labeled_wl(g, {0, 4});
  CHECK(intra != cross);
  const auto d = kDefaultHashDim;
  CHECK(intra[3 * d + 0] == 1.0);  // distance 1
  CHECK(cross[3 * d + 4] == 1.0);  // unreachable

  const auto node = PairwiseEmbedding::nodes(wl_node_colors(g));
  CHECK(node(0, 1) == node(0, 4));
  CHECK(node.structural());

  // Diagonal pairs are well defined and differ from the rest of 0's pairs.
  const auto diag = pairwise_labeled_wl(g, {0, 0});
  CHECK(diag != intra);
  CHECK(diag != cross);
  // Images under a component swap coincide.
  CHECK(pairwise_labeled_wl(g, {1, 2}) == pairwise_labeled_wl(g, {4, 5}));
  CHECK(pairwise_labeled_wl(g, {0, 4}) == pairwise_labeled_wl(g, {3, 1}));
}

TEST_CASE("labeled WL component scope equals full scope on connected graphs") {
  const auto g = fixtures::graph_of(4, fixtures::kCycle4);
  LabeledWlOptions full;
  full.component_scope = false;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(LabeledWl(g)(i, j) == LabeledWl(g, full)(i, j));
  }
}

TEST_CASE("one-hot embedding") {
  const auto t = one_hot_embed(ObservedGraph(3, false));
  CHECK(t.rows == std::vector<Vector>{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto sym = one_hot_embed(fixtures::graph_of(6, fixtures::kTwoTriangles));
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) CHECK(sym.rows[i] != sym.rows[j]);
  }
}

TEST_CASE("factorization training") {
  // Rank-1 target a = u v^T with a numeric alphabet.
  const std::vector<double> u{0.5, 1.0, -0.5, 0.8}, v{1.0, -0.6, 0.4, 0.9};
  std::vector<double> codes;
  ObservedGraph g(4, true, Alphabet(16, [&] {
    std::vector<double> table;
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) table.push_back(u[i] * v[j]);
    }
    return table;
  }()));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) g.set(i, j, static_cast<EdgeValue>(i * 4 + j));
  }
  FactorizationOptions o;
  o.dim = 1;
  o.epochs = 400;
  o.lr = 0.05;
  o.seed = 3;
  const auto r = factorization_train(g, o);
  CHECK(r.loss_curve.back() < 1e-3);
  CHECK(r.table.dim() == 2);
  const auto again = factorization_train(g, o);
  CHECK(again.table.rows == r.table.rows);

  const auto zero = factorization_train(ObservedGraph(5, false), o);
  CHECK(zero.loss_curve.back() < 1e-6);

  o.lr = 50;
  CHECK_THROWS_WITH(factorization_train(fixtures::graph_of(6, fixtures::kTwoTriangles), o),
                    "factorization diverged; reduce lr");
}

TEST_CASE("factorization gradient matches central differences") {
  Rng rng(37);
  const auto g = oracle::random_graph(rng, 6, true, 3, 0.5, true);
  const auto a = numeric_adjacency(g);
  const std::size_t d = 3;
  FactorizationState s{Matrix(6, d), Matrix(6, d)};
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      s.u(i, k) = rng.normal();
      s.v(i, k) = rng.normal();
    }
  }
  const auto grad = factorization_gradient(a, s);
  const double h = 1e-5;
  for (int c = 0; c < 20; ++c) {
    const bool pick_u = rng.bernoulli(0.5);
    const auto i = rng.below(6), k = rng.below(d);
    auto plus = s, minus = s;
    (pick_u ? plus.u : plus.v)(i, k) += h;
    (pick_u ? minus.u : minus.v)(i, k) -= h;
    const double fd = (factorization_loss(a, plus) - factorization_loss(a, minus)) / (2 * h);
    const double an = (pick_u ? grad.u : grad.v)(i, k);
    CHECK(std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3}) < 1e-5);
  }
}

TEST_CASE("embedding dumps") {
  std::ostringstream os;
  write_embedding_csv(os, one_hot_embed(ObservedGraph(2, false)));
  CHECK(os.str() == "node,dim0,dim1\n0,1,0\n1,0,1\n");
  std::ostringstream ps;
  write_pairwise_csv(ps, PairwiseEmbedding::nodes(one_hot_embed(ObservedGraph(2, false))), {{0, 1}});
  CHECK(ps.str() == "i,j,dim0,dim1,dim2,dim3\n0,1,1,0,0,1\n");
}
