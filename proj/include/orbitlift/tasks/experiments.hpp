#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orbitlift/embeddings.hpp"
#include "orbitlift/learning.hpp"
#include "orbitlift/symmetry.hpp"
#include "orbitlift/tasks/covariance.hpp"
#include "orbitlift/tasks/family.hpp"
#include "orbitlift/tasks/similarity.hpp"
#include "orbitlift/tasks/synthetic.hpp"

namespace orbitlift::tasks {

struct MethodResult {
  std::string method;
  std::string metric;
  std::size_t k = 0;
  double value = 0;
  double final_train_loss = 0;
};

inline std::vector<MetricRow> metric_rows(const std::vector<MethodResult>& results, const std::string& run_id,
                                          std::uint64_t seed) {
  std::vector<MetricRow> rows;
  for (const auto& r : results) rows.push_back({run_id, r.method, r.metric, r.k, r.value, seed});
  return rows;
}

// ---------------------------------------------------------------------------
// Family trees: Hits@K on the held-out copy

struct FamilyExperimentOptions {
  FamilyOptions forest;
  std::size_t hash_dim = 32;
  int wl_iterations = 4;
  std::size_t factorization_dim = 16;
  std::size_t factorization_epochs = 10;
  std::size_t factorization_samples = 0;  // per epoch; 0 means 50 per person
  double factorization_lr = 0.02;
  std::size_t epochs = 30;
  double lr = 0.005;
  std::size_t batch = 32;
  double k_fraction = 0.05;
};

struct FamilyExperimentResult {
  std::size_t persons = 0, train_pairs = 0, test_pairs = 0, test_positives = 0;
  std::vector<MethodResult> methods;
};

/// Trains a pairwise structural encoder (labeling trick), a structural node
/// encoder (WL colours) and a positional node encoder (factorization) on the
/// first planted copies and ranks the test pairs of the second copies.
inline FamilyExperimentResult run_family_experiment(const FamilyTreeKb& kb, const FamilySplit& split,
                                                    const FamilyExperimentOptions& o, std::uint64_t seed) {
  const auto g = kb.graph();
  FamilyExperimentResult result;
  result.persons = kb.size();
  result.train_pairs = split.train.size();
  result.test_pairs = split.test.size();
  for (const auto& e : split.test) result.test_positives += e.positive ? 1 : 0;
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(o.k_fraction * result.test_pairs)));

  std::vector<TrainingExample> examples;
  for (const auto& e : split.train) examples.push_back({e.pair, e.positive ? 1.0 : 0.0, 1.0});

  LabeledWlOptions wl;
  wl.dim = o.hash_dim;
  wl.iterations = o.wl_iterations;
  FactorizationOptions fo;
  fo.dim = o.factorization_dim;
  fo.epochs = o.factorization_epochs;
  fo.lr = o.factorization_lr;
  fo.seed = derive_key(seed, "factorization");
  fo.samples_per_epoch = o.factorization_samples ? o.factorization_samples : 50 * g.size();

  const std::vector<std::pair<std::string, PairwiseEmbedding>> methods{
      {"pairwise_structural", PairwiseEmbedding::labeled_wl(g, wl)},
      {"node_structural", PairwiseEmbedding::nodes(wl_node_colors(g, -1, o.hash_dim))},
      {"positional", PairwiseEmbedding::nodes(factorization_train(g, fo).table)},
  };
  for (const auto& [name, embedding] : methods) {
    TrainOptions to;
    to.epochs = o.epochs;
    to.lr = o.lr;
    to.batch = o.batch;
    to.optimizer = Optimizer::adam;
    to.seed = derive_key(seed, "family-model");
    const auto trained = train(make_link_model(embedding, LossKind::bce), examples, to);
    std::vector<ScoredPair> scores;
    scores.reserve(split.test.size());
    for (const auto& e : split.test) scores.push_back({e.pair, predict(trained.model, e.pair), e.positive});
    result.methods.push_back({name, "hits", k, hits_at_k(std::move(scores), k), trained.report.losses.back()});
  }
  return result;
}

inline FamilyExperimentResult run_family_experiment(const FamilyExperimentOptions& o, std::uint64_t seed) {
  const auto kb = generate_family_forest(o.forest, derive_key(seed, "forest"));
  const auto split = family_split(kb, infer_relations(kb), derive_key(seed, "split"));
  return run_family_experiment(kb, split, o, seed);
}

// ---------------------------------------------------------------------------
// Covariance refinement: MSE on held-out attribute pairs

struct CovarianceExperimentOptions {
  std::size_t attributes = 60;
  std::size_t subjects = 68;
  std::size_t clusters = 6;
  CovarianceOptions task;
  std::size_t hash_dim = 32;
  std::size_t svd_rank = 16;
  std::size_t epochs = 600;
  double lr = 0.01;
  std::size_t batch = 0;
};

struct CovarianceExperimentResult {
  std::size_t attributes = 0, probes = 0, queries = 0;
  std::vector<std::string> warnings;
  std::vector<MethodResult> methods;
};

/// Regresses full-sample covariance entries from the subset covariance graph
/// with a joint pair encoder, a structural node encoder (WL colours) and a
/// positional node encoder (SVD rows); reports query MSE on raw values.
inline CovarianceExperimentResult run_covariance_experiment(const CovarianceTask& task,
                                                            const CovarianceExperimentOptions& o, std::uint64_t seed) {
  const auto& g = task.graph;
  CovarianceExperimentResult result;
  result.attributes = task.attributes.size();
  result.probes = task.probes.size();
  result.queries = task.queries.size();
  result.warnings = task.warnings;
  if (task.probes.empty() || task.queries.empty()) throw Error("covariance split left no probes or no queries");

  std::vector<TrainingExample> examples;
  for (const auto& q : task.probes) examples.push_back({q.pair, q.target, 1.0});

  const std::vector<std::pair<std::string, PairwiseEmbedding>> methods{
      {"pairwise_structural", PairwiseEmbedding::joint(g)},
      {"node_structural", PairwiseEmbedding::nodes(wl_node_colors(g, -1, o.hash_dim))},
      {"positional", PairwiseEmbedding::nodes(svd_embed(g, std::min(o.svd_rank, g.size())))},
  };
  for (const auto& [name, embedding] : methods) {
    TrainOptions to;
    to.epochs = o.epochs;
    to.lr = o.lr;
    to.batch = o.batch;
    to.optimizer = Optimizer::adam;
    to.seed = derive_key(seed, "covariance-model");
    const auto trained = train(make_link_model(embedding, LossKind::mse), examples, to);
    double mse = 0;
    for (const auto& q : task.queries) {
      const double r = predict(trained.model, q.pair) - q.target;
      mse += r * r;
    }
    mse /= static_cast<double>(task.queries.size());
    result.methods.push_back({name, "mse", 0, mse, trained.report.losses.back()});
  }
  return result;
}

/// Synthetic samples (attributes x subjects from o) through the task builder.
inline CovarianceExperimentResult run_covariance_experiment(const CovarianceExperimentOptions& o, std::uint64_t seed) {
  const auto samples = synthetic_covariance_samples(o.subjects, o.attributes, o.clusters, derive_key(seed, "samples"));
  return run_covariance_experiment(build_covariance_task(samples, o.task, derive_key(seed, "task")), o, seed);
}

// ---------------------------------------------------------------------------
// Structural similarity on an orbit-keyed synthetic process

struct SimilarityExperimentOptions {
  std::size_t train_probes = 2000;
  std::size_t test_probes = 400;
  double high_rate = 0.9, low_rate = 0.1;
  std::size_t hash_dim = 16;
  std::size_t epochs = 200;
  double lr = 0.01;
  SimilarityOptions test;
};

/// Two triangles, a 4-cycle and a single edge. Off-diagonal pair orbits get
/// alternating high and low link rates in order of first occurrence.
inline std::vector<NodePair> similarity_fixture_edges() {
  return {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {6, 7}, {7, 8}, {8, 9}, {6, 9}, {10, 11}};
}

inline SimilarityReport run_similarity_experiment(const SimilarityExperimentOptions& o, std::uint64_t seed) {
  const auto edges = similarity_fixture_edges();
  ObservedGraph shape(12, false);
  for (auto [i, j] : edges) shape.set(i, j, 1);
  const auto partition = orbits(shape);
  json rates = json::object();
  std::size_t offdiag = 0;
  for (std::size_t orbit = 0; orbit < partition.pair_orbit_count; ++orbit) {
    const auto members = partition.pair_members(orbit);
    if (members.front().first == members.front().second) continue;
    rates[pair_orbit_key(shape, members.front())] = offdiag++ % 2 == 0 ? o.high_rate : o.low_rate;
  }
  const auto spec = ScmSpec::from_json(frozen_graph_config(edges, {{"type", "orbit_rates"}, {"rates", rates}}));
  const auto run = run_scm(spec, derive_key(seed, "similarity-run"));
  const auto observed = orbits(run.graph);
  std::vector<std::vector<NodePair>> members;
  for (std::size_t orbit = 0; orbit < observed.pair_orbit_count; ++orbit) {
    auto m = observed.pair_members(orbit);
    if (m.front().first != m.front().second) members.push_back(std::move(m));
  }
  const auto t1 = spec.observation_time + 1;
  auto draw = [&](std::string_view stream, std::size_t count) {
    std::vector<ProbeRecord> out;
    Rng rng(derive_key(seed, stream));
    for (std::size_t m = 0; m < count; ++m) {
      const auto& orbit = members[rng.below(members.size())];
      const auto pair = orbit[rng.below(orbit.size())];
      out.push_back(probe(spec, run.log, run.pi, pair, t1, derive_key(seed, stream, {m})));
    }
    return out;
  };
  std::vector<TrainingExample> examples;
  for (const auto& r : draw("similarity-train", o.train_probes)) {
    examples.push_back({r.pair, r.outcome != kZero ? 1.0 : 0.0, 1.0});
  }
  LabeledWlOptions wl;
  wl.dim = o.hash_dim;
  TrainOptions to;
  to.epochs = o.epochs;
  to.lr = o.lr;
  to.batch = 0;
  to.optimizer = Optimizer::adam;
  to.seed = derive_key(seed, "similarity-model");
  const auto model =
      train(make_link_model(PairwiseEmbedding::labeled_wl(run.graph, wl), LossKind::bce), aggregate(examples), to)
          .model;
  return structural_similarity_test(model, draw("similarity-test", o.test_probes), derive_key(seed, "fisher"),
                                    o.test);
}

}  // namespace orbitlift::tasks
