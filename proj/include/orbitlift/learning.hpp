#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "orbitlift/embeddings.hpp"
#include "orbitlift/error.hpp"
#include "orbitlift/rng.hpp"
#include "orbitlift/scm.hpp"
#include "orbitlift/symmetry.hpp"

namespace orbitlift {

enum class LossKind { bce, mse };

inline const char* to_string(LossKind k) { return k == LossKind::bce ? "bce" : "mse"; }

inline LossKind parse_loss(const std::string& s) {
  if (s == "bce") return LossKind::bce;
  if (s == "mse") return LossKind::mse;
  throw Error("unknown loss '" + s + "'");
}

// ---------------------------------------------------------------------------
// MLP [d -> h -> 1] with ELU hidden units

inline double elu(double x) { return x > 0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0 ? 1.0 : std::exp(x); }
inline double sigmoid(double z) { return z >= 0 ? 1 / (1 + std::exp(-z)) : std::exp(z) / (1 + std::exp(z)); }
// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Parameters live in one flat vector: W1 (h x d, row-major), b1 (h), w2 (h), b2.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in, std::size_t hidden) : in_(in), hidden_(hidden), params_(hidden * in + 2 * hidden + 1, 0.0) {}

  static Mlp initialised(std::size_t in, std::size_t hidden, std::uint64_t seed) {
    Mlp m(in, hidden);
    Rng rng(derive_key(seed, "mlp-init"));
    const double s1 = 1 / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
    const double s2 = 1 / std::sqrt(static_cast<double>(std::max<std::size_t>(hidden, 1)));
    for (std::size_t k = 0; k < hidden * in; ++k) m.params_[k] = s1 * rng.normal();
    for (std::size_t k = 0; k < hidden; ++k) m.params_[m.w2_offset() + k] = s2 * rng.normal();
    return m;
  }

  std::size_t in() const { return in_; }
  std::size_t hidden() const { return hidden_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// Output pre-activation (logit for bce, prediction for mse).
  double forward(const Vector& x) const {
    double z = params_[b2_offset()];
    for (std::size_t h = 0; h < hidden_; ++h) {
      double a = params_[b1_offset() + h];
      const double* w = &params_[h * in_];
      for (std::size_t k = 0; k < in_; ++k) a += w[k] * x[k];
      z += params_[w2_offset() + h] * elu(a);
    }
    return z;
  }

  /// Adds weight * dL/dparams for one example to `grad` and returns weight * L.
  double accumulate(const Vector& x, double y, double weight, LossKind loss, std::vector<double>& grad) const {
    pre_.resize(hidden_);
    double z = params_[b2_offset()];
    for (std::size_t h = 0; h < hidden_; ++h) {
      double a = params_[b1_offset() + h];
      const double* w = &params_[h * in_];
      for (std::size_t k = 0; k < in_; ++k) a += w[k] * x[k];
      pre_[h] = a;
      z += params_[w2_offset() + h] * elu(a);
    }
    double l, dz;
    if (loss == LossKind::bce) {
      l = softplus(z) - y * z;
      dz = sigmoid(z) - y;
    } else {
      l = (z - y) * (z - y);
      dz = 2 * (z - y);
    }
    dz *= weight;
    grad[b2_offset()] += dz;
    for (std::size_t h = 0; h < hidden_; ++h) {
      grad[w2_offset() + h] += dz * elu(pre_[h]);
      const double da = dz * params_[w2_offset() + h] * elu_grad(pre_[h]);
      if (da == 0.0) continue;
      grad[b1_offset() + h] += da;
      double* g = &grad[h * in_];
      for (std::size_t k = 0; k < in_; ++k) g[k] += da * x[k];
    }
    return weight * l;
  }

  double loss(const Vector& x, double y, LossKind kind) const {
    const double z = forward(x);
    return kind == LossKind::bce ? softplus(z) - y * z : (z - y) * (z - y);
  }

 private:
  std::size_t b1_offset() const { return hidden_ * in_; }
  std::size_t w2_offset() const { return hidden_ * in_ + hidden_; }
  std::size_t b2_offset() const { return hidden_ * in_ + 2 * hidden_; }

  std::size_t in_ = 0, hidden_ = 0;
  std::vector<double> params_;
  mutable std::vector<double> pre_;
};

// ---------------------------------------------------------------------------
// Link model

/// rho(Gamma(i, j, g)): pair encoder, per-feature standardisation fitted on
/// the training pairs, and the MLP head.
struct LinkModel {
  PairwiseEmbedding embedding;
  Mlp mlp;
  LossKind loss = LossKind::bce;
  Vector mean, inv_std;  // empty = identity

  Vector features(std::size_t i, std::size_t j) const {
    auto x = embedding(i, j);
    if (!mean.empty()) {
      for (std::size_t k = 0; k < x.size(); ++k) x[k] = (x[k] - mean[k]) * inv_std[k];
    }
    return x;
  }
};

/// Zero-weight head: predicts sigmoid(0) = 0.5 under bce.
inline LinkModel make_link_model(PairwiseEmbedding embedding, LossKind loss) {
  const auto d = embedding.dim();
  return LinkModel{std::move(embedding), Mlp(d, d), loss, {}, {}};
}

inline double predict(const LinkModel& m, NodePair pair) {
  const double z = m.mlp.forward(m.features(pair.first, pair.second));
  return m.loss == LossKind::bce ? sigmoid(z) : z;
}

struct TrainingExample {
  NodePair pair;
  double target = 0;
  double weight = 1;
};

/// Merges repeated pairs into one example carrying the mean target and the
/// summed weight; the weighted objective is unchanged.
inline std::vector<TrainingExample> aggregate(const std::vector<TrainingExample>& examples) {
  std::map<NodePair, std::pair<double, double>> acc;
  for (const auto& e : examples) {
    auto& [sum, w] = acc[e.pair];
    sum += e.weight * e.target;
    w += e.weight;
  }
  std::vector<TrainingExample> out;
  for (const auto& [p, a] : acc) out.push_back({p, a.first / a.second, a.second});
  return out;
}

/// Binary targets for bce (outcome != ZERO), the alphabet's numeric cast for mse.
inline std::vector<TrainingExample> examples_from_probes(const ProbeSequence& probes, LossKind loss) {
  std::vector<TrainingExample> out;
  for (const auto& r : probes.records) {
    const double y = loss == LossKind::bce ? (r.outcome != kZero ? 1.0 : 0.0)
                                           : probes.base_graph.alphabet().numeric(r.outcome);
    out.push_back({r.pair, y, 1.0});
  }
  return out;
}

enum class Optimizer { sgd, adam };

struct TrainOptions {
  std::size_t epochs = 200;
  double lr = 0.01;
  std::size_t batch = 32;  // 0 = full batch
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::sgd;
  double momentum = 0.9;
  bool standardize = true;
};

struct TrainReport {
  std::vector<double> losses;  // weighted mean training loss per epoch
  std::uint64_t checksum = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0;
};

inline std::uint64_t weights_checksum(const LinkModel& m) {
  std::uint64_t h = 0x84caa73b2f1e6c55ULL;
  auto mix = [&h](double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    h = hash_combine(h, bits);
  };
  for (auto x : m.mlp.params()) mix(x);
  for (auto x : m.mean) mix(x);
  for (auto x : m.inv_std) mix(x);
  return h;
}

struct TrainResult {
  LinkModel model;
  TrainReport report;
};

/// Minibatch descent on the weighted mean loss. The MLP is re-initialised
/// from the seed; hidden width equals the embedding dimension.
inline TrainResult train(LinkModel model, const std::vector<TrainingExample>& examples, const TrainOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  if (examples.empty()) throw Error("empty probe set");
  const auto d = model.embedding.dim();
  std::vector<Vector> xs;
  xs.reserve(examples.size());
  double total_weight = 0;
  for (const auto& e : examples) {
    if (model.loss == LossKind::bce && (e.target < 0 || e.target > 1)) throw Error("bce targets must lie in [0, 1]");
    xs.push_back(model.embedding(e.pair));
    total_weight += e.weight;
  }
  model.mean.clear();
  model.inv_std.clear();
  if (o.standardize) {
    model.mean.assign(d, 0.0);
    model.inv_std.assign(d, 1.0);
    for (std::size_t m = 0; m < xs.size(); ++m) {
      for (std::size_t k = 0; k < d; ++k) model.mean[k] += examples[m].weight * xs[m][k] / total_weight;
    }
    for (std::size_t k = 0; k < d; ++k) {
      double var = 0;
      for (std::size_t m = 0; m < xs.size(); ++m) {
        var += examples[m].weight * (xs[m][k] - model.mean[k]) * (xs[m][k] - model.mean[k]) / total_weight;
      }
      model.inv_std[k] = var > 1e-12 ? 1 / std::sqrt(var) : 1.0;
    }
    for (auto& x : xs) {
      for (std::size_t k = 0; k < d; ++k) x[k] = (x[k] - model.mean[k]) * model.inv_std[k];
    }
  }
  model.mlp = Mlp::initialised(d, d, o.seed);
  auto& w = model.mlp.params();
  std::vector<double> grad(w.size()), m1(w.size(), 0.0), m2(w.size(), 0.0);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  Rng rng(derive_key(o.seed, "batches"));
  const std::size_t batch = o.batch == 0 ? examples.size() : o.batch;
  std::uint64_t step = 0;
  TrainReport report;
  for (std::size_t epoch = 0; epoch < o.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      double bw = 0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& e = examples[order[k]];
        epoch_loss += model.mlp.accumulate(xs[order[k]], e.target, e.weight, model.loss, grad);
        bw += e.weight;
      }
      ++step;
      for (std::size_t p = 0; p < w.size(); ++p) {
        const double g = grad[p] / bw;
        if (o.optimizer == Optimizer::sgd) {
          m1[p] = o.momentum * m1[p] + g;
          w[p] -= o.lr * m1[p];
        } else {
          m1[p] = 0.9 * m1[p] + 0.1 * g;
          m2[p] = 0.999 * m2[p] + 0.001 * g * g;
          const double mh = m1[p] / (1 - std::pow(0.9, static_cast<double>(step)));
          const double vh = m2[p] / (1 - std::pow(0.999, static_cast<double>(step)));
          w[p] -= o.lr * mh / (std::sqrt(vh) + 1e-8);
        }
      }
    }
    epoch_loss /= total_weight;
    if (!std::isfinite(epoch_loss)) throw Error("training diverged");
    report.losses.push_back(epoch_loss);
  }
  report.seed = o.seed;
  report.checksum = weights_checksum(model);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return TrainResult{std::move(model), std::move(report)};
}

inline TrainResult train(LinkModel model, const ProbeSequence& probes, const TrainOptions& o) {
  auto examples = examples_from_probes(probes, model.loss);
  return train(std::move(model), examples, o);
}

// ---------------------------------------------------------------------------
// Checkpoints: "OLCKPT" magic, format version, then little-endian fields.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("checkpoint truncated");
  return v;
}

inline void put_vector(std::ostream& os, const std::vector<double>& v) {
  put<std::uint64_t>(os, v.size());
  for (auto x : v) put(os, x);
}

inline std::vector<double> get_vector(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1ULL << 32)) throw Error("checkpoint corrupt");
  std::vector<double> v(n);
  for (auto& x : v) x = get<double>(is);
  return v;
}

}  // namespace detail

/// Node-embedding tables are stored in full; joint encoders are rebuilt from
/// the graph passed to `load_checkpoint`.
inline void save_checkpoint(std::ostream& os, const LinkModel& m) {
  os.write("OLCKPT", 6);
  detail::put(os, kCheckpointVersion);
  detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(m.loss));
  detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(m.embedding.kind()));
  detail::put<std::uint64_t>(os, m.embedding.node_count());
  const auto& wl = m.embedding.wl_options();
  detail::put<std::int32_t>(os, wl.iterations);
  detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(wl.pooling));
  detail::put<std::uint64_t>(os, wl.dim);
  detail::put<std::uint8_t>(os, wl.component_scope ? 1 : 0);
  if (const auto* t = m.embedding.table()) {
    detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(t->kind));
    detail::put<std::uint64_t>(os, t->rows.size());
    for (const auto& row : t->rows) detail::put_vector(os, row);
  }
  detail::put<std::uint64_t>(os, m.mlp.in());
  detail::put<std::uint64_t>(os, m.mlp.hidden());
  detail::put_vector(os, m.mlp.params());
  detail::put_vector(os, m.mean);
  detail::put_vector(os, m.inv_std);
}

inline LinkModel load_checkpoint(std::istream& is, const ObservedGraph& g) {
  char magic[6];
  if (!is.read(magic, 6) || std::string(magic, 6) != "OLCKPT") throw Error("not a checkpoint file");
  if (detail::get<std::uint32_t>(is) != kCheckpointVersion) throw Error("unsupported checkpoint version");
  const auto loss = static_cast<LossKind>(detail::get<std::uint8_t>(is));
  const auto kind = static_cast<PairKind>(detail::get<std::uint8_t>(is));
  const auto nodes = detail::get<std::uint64_t>(is);
  LabeledWlOptions wl;
  wl.iterations = detail::get<std::int32_t>(is);
  wl.pooling = static_cast<Pooling>(detail::get<std::uint8_t>(is));
  wl.dim = detail::get<std::uint64_t>(is);
  wl.component_scope = detail::get<std::uint8_t>(is) != 0;
  if (nodes != g.size()) throw Error("checkpoint was trained on a graph with " + std::to_string(nodes) + " nodes");
  auto embedding = [&]() -> PairwiseEmbedding {
    switch (kind) {
      case PairKind::labeled_wl: return PairwiseEmbedding::labeled_wl(g, wl);
      case PairKind::joint_features: return PairwiseEmbedding::joint(g);
      case PairKind::node_concat:
      case PairKind::node_hadamard: {
        NodeEmbeddingTable t;
        t.kind = static_cast<NodeEmbeddingKind>(detail::get<std::uint8_t>(is));
        t.rows.resize(detail::get<std::uint64_t>(is));
        for (auto& row : t.rows) row = detail::get_vector(is);
        return PairwiseEmbedding::nodes(std::move(t), kind == PairKind::node_hadamard);
      }
    }
    throw Error("checkpoint corrupt");
  }();
  const auto in = detail::get<std::uint64_t>(is), hidden = detail::get<std::uint64_t>(is);
  LinkModel m{std::move(embedding), Mlp(in, hidden), loss, {}, {}};
  m.mlp.params() = detail::get_vector(is);
  m.mean = detail::get_vector(is);
  m.inv_std = detail::get_vector(is);
  if (m.mlp.params().size() != hidden * in + 2 * hidden + 1 || in != m.embedding.dim()) {
    throw Error("checkpoint corrupt");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Metrics

struct ScoredPair {
  NodePair pair;
  double score = 0;
  bool positive = false;
};

/// Fraction of positives among the k best scores; ties go to the
/// lexicographically smaller pair.
inline double hits_at_k(std::vector<ScoredPair> scores, std::size_t k) {
  if (k == 0 || scores.size() < k) throw Error("hits@k needs at least k scored pairs");
  std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k), scores.end(),
                    [](const ScoredPair& a, const ScoredPair& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.pair < b.pair;
                    });
  std::size_t hits = 0;
  for (std::size_t m = 0; m < k; ++m) hits += scores[m].positive ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

struct MetricRow {
  std::string run_id, method, metric;
  std::size_t k = 0;
  double value = 0;
  std::uint64_t seed = 0;
};

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << "run_id,method,metric,k,value,seed\n";
  for (const auto& r : rows) {
    os << r.run_id << ',' << r.method << ',' << r.metric << ',' << r.k << ',' << r.value << ',' << r.seed << '\n';
  }
}

// ---------------------------------------------------------------------------
// Embedding bias

enum class BiasEmbedding { labeled_wl, joint_features, wl_node, one_hot };

inline const char* to_string(BiasEmbedding k) {
  switch (k) {
    case BiasEmbedding::labeled_wl: return "labeled_wl";
    case BiasEmbedding::joint_features: return "joint_features";
    case BiasEmbedding::wl_node: return "wl_node";
    case BiasEmbedding::one_hot: return "one_hot";
  }
  return "?";
}

inline PairwiseEmbedding make_embedding(BiasEmbedding kind, const ObservedGraph& g, std::size_t hash_dim) {
  LabeledWlOptions wl;
  wl.dim = hash_dim;
  switch (kind) {
    case BiasEmbedding::labeled_wl: return PairwiseEmbedding::labeled_wl(g, wl);
    case BiasEmbedding::joint_features: return PairwiseEmbedding::joint(g);
    case BiasEmbedding::wl_node: return PairwiseEmbedding::nodes(wl_node_colors(g, -1, hash_dim));
    case BiasEmbedding::one_hot: return PairwiseEmbedding::nodes(one_hot_embed(g));
  }
  throw Error("unknown embedding kind");
}

struct BiasOptions {
  std::vector<double> learning_rates{0.003, 0.01, 0.03};
  std::vector<std::size_t> epochs{200, 600};
  std::size_t hash_dim = 16;
};

struct BiasReport {
  double risk = 0;  // best expected bce (nats) on fresh probes over the grid
  double best_lr = 0;
  std::size_t best_epochs = 0;
  std::vector<double> grid_risks;
};

/// Probes off-diagonal pairs of the process's observed graph, choosing a pair
/// orbit uniformly and then a member uniformly; every probe is a single
/// intervention on the observed trace with its own exogenous stream. Trains
/// over a small (lr, epochs) grid and reports the lowest bce on fresh probes.
inline BiasReport measure_bias(BiasEmbedding kind, const ScmSpec& spec, std::size_t trials, std::uint64_t seed,
                               const BiasOptions& options = {}) {
  const auto run = run_scm(spec, derive_key(seed, "bias-run"));
  const auto& g = run.graph;
  const auto partition = orbits(g);
  std::vector<std::vector<NodePair>> members;
  for (std::size_t o = 0; o < partition.pair_orbit_count; ++o) {
    auto m = partition.pair_members(o);
    if (m.front().first != m.front().second) members.push_back(std::move(m));
  }
  if (members.empty()) throw Error("fixture has no off-diagonal pairs");
  const auto t1 = spec.observation_time + 1;
  auto draw = [&](std::string_view stream, std::size_t count) {
    std::vector<TrainingExample> out;
    Rng rng(derive_key(seed, stream));
    for (std::size_t m = 0; m < count; ++m) {
      const auto& orbit = members[rng.below(members.size())];
      const auto pair = orbit[rng.below(orbit.size())];
      const auto y = probe(spec, run.log, run.pi, pair, t1, derive_key(seed, stream, {m})).outcome;
      out.push_back({pair, y != kZero ? 1.0 : 0.0, 1.0});
    }
    return out;
  };
  const auto train_set = aggregate(draw("bias-train", trials));
  const auto eval_set = draw("bias-eval", trials);
  const auto base = make_link_model(make_embedding(kind, g, options.hash_dim), LossKind::bce);

  BiasReport report;
  report.risk = std::numeric_limits<double>::infinity();
  for (auto lr : options.learning_rates) {
    for (auto epochs : options.epochs) {
      TrainOptions o;
      o.epochs = epochs;
      o.lr = lr;
      o.batch = 0;
      o.optimizer = Optimizer::adam;
      o.seed = derive_key(seed, "bias-model");
      const auto model = train(base, train_set, o).model;
      std::map<NodePair, double> cache;
      double risk = 0;
      for (const auto& e : eval_set) {
        auto it = cache.find(e.pair);
        if (it == cache.end()) it = cache.emplace(e.pair, predict(model, e.pair)).first;
        const double p = std::clamp(it->second, 1e-12, 1 - 1e-12);
        risk -= e.target * std::log(p) + (1 - e.target) * std::log(1 - p);
      }
      risk /= static_cast<double>(eval_set.size());
      report.grid_risks.push_back(risk);
      if (risk < report.risk) {
        report.risk = risk;
        report.best_lr = lr;
        report.best_epochs = epochs;
      }
    }
  }
  return report;
}

}  // namespace orbitlift
