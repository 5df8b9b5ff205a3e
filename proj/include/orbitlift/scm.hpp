#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbitlift/error.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/mechanisms.hpp"
#include "orbitlift/rng.hpp"

namespace orbitlift {

struct InvarianceFlags {
  bool time_gap = false;
  bool time_exch = false;
  bool nonlink_ign = false;
  bool id_exch = false;
  bool non_interfering = false;

  bool all_lifting() const { return time_gap && time_exch && nonlink_ign && id_exch; }
};

/// How the local exogenous value draw is keyed.
///   pair: independent per (time, pair); alternatives at one time never share it.
///   time: one draw per time step, shared by every pair probed at that time.
enum class ExoMode { pair, time };

/// Generative process: pair mechanism f_E, value mechanism f_X, exogenous
/// samplers, declared invariances. Built from a JSON document (see README).
struct ScmSpec {
  bool directed = false;
  Alphabet alphabet;
  std::int64_t observation_time = 1;
  ExoMode exo_x = ExoMode::pair;
  InvarianceFlags flags;
  PairMechanismPtr pair_mechanism;
  ValueMechanismPtr value_mechanism;
  json config;

  static ScmSpec from_json(const json& j) {
    using namespace mech;
    if (!j.is_object()) config_error("<root>", "expected an object");
    static const char* known[] = {"directed", "alphabet", "observation_time", "exo_x", "flags",
                                  "pair_mechanism", "value_mechanism"};
    for (const auto& [key, val] : j.items()) {
      (void)val;
      if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
        config_error(key, "unknown field");
      }
    }
    ScmSpec s;
    s.config = j;
    if (j.contains("directed")) {
      if (!j.at("directed").is_boolean()) config_error("directed", "expected a boolean");
      s.directed = j.at("directed").get<bool>();
    }
    const auto a = count(j, "<root>", "alphabet", 2.0);
    if (a < 2 || a > 256) config_error("alphabet", "must be in [2, 256]");
    s.alphabet = Alphabet(a);
    s.observation_time = static_cast<std::int64_t>(count(j, "<root>", "observation_time", 1.0));
    if (s.observation_time < 1) config_error("observation_time", "must be at least 1");
    if (j.contains("exo_x")) {
      const auto& e = j.at("exo_x");
      if (e == "pair") {
        s.exo_x = ExoMode::pair;
      } else if (e == "time") {
        s.exo_x = ExoMode::time;
      } else {
        config_error("exo_x", "expected \"pair\" or \"time\"");
      }
    }
    if (j.contains("flags")) {
      const auto& f = j.at("flags");
      if (!f.is_object()) config_error("flags", "expected an object");
      for (const auto& [key, val] : f.items()) {
        if (!val.is_boolean()) config_error("flags." + key, "expected a boolean");
        const bool b = val.get<bool>();
        if (key == "time_gap") {
          s.flags.time_gap = b;
        } else if (key == "time_exch") {
          s.flags.time_exch = b;
        } else if (key == "nonlink_ign") {
          s.flags.nonlink_ign = b;
        } else if (key == "id_exch") {
          s.flags.id_exch = b;
        } else if (key == "non_interfering") {
          s.flags.non_interfering = b;
        } else {
          config_error("flags." + key, "unknown flag");
        }
      }
    }
    const MechanismContext ctx{s.directed, s.alphabet.size()};
    s.pair_mechanism = make_pair_mechanism(field(j, "<root>", "pair_mechanism"), "pair_mechanism", ctx);
    s.value_mechanism = make_value_mechanism(field(j, "<root>", "value_mechanism"), "value_mechanism", ctx);
    return s;
  }
};

/// Hidden generative trace. Index t-1 holds step t.
struct EventLog {
  std::vector<NodePair> pairs;
  std::vector<EdgeValue> values;
  std::vector<std::uint64_t> exo_e;
  std::vector<double> exo_x;
  double world = 0;  // world-level latent draw shared by all steps and probes

  std::size_t size() const { return pairs.size(); }

  std::vector<Event> events() const {
    std::vector<Event> out(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) out[k] = {pairs[k], values[k]};
    return out;
  }

  std::size_t node_count() const {
    std::size_t m = 0;
    for (const auto& p : pairs) m = std::max({m, p.first + 1, p.second + 1});
    return m;
  }

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

struct ProbeRecord {
  NodePair pair;  // observed ids
  std::int64_t time = 0;
  EdgeValue outcome = kZero;
};

struct ProbeSequence {
  std::vector<ProbeRecord> records;
  ObservedGraph base_graph;
};

struct ScmRun {
  EventLog log;
  ObservedGraph graph;
  Permutation pi;  // hidden id -> observed id
};

struct RunOptions {
  /// Draw the uniform relabelling. Disabling it is a test hook for a
  /// generator that leaks hidden ids into the observation.
  bool shuffle = true;
};

namespace detail {

inline NodePair oriented(NodePair p, bool directed) {
  if (!directed && p.first > p.second) std::swap(p.first, p.second);
  return p;
}

inline double exo_x_draw(ExoMode mode, std::uint64_t seed, std::string_view stream, std::int64_t t,
                         NodePair hidden, bool directed) {
  if (mode == ExoMode::time) return unit_at(seed, stream, {static_cast<std::uint64_t>(t)});
  const auto p = oriented(hidden, directed);
  return unit_at(seed, stream, {static_cast<std::uint64_t>(t), p.first, p.second});
}

inline EdgeValue checked_value(const ScmSpec& spec, const ValueQuery& q) {
  const auto v = spec.value_mechanism->value(q);
  if (!spec.alphabet.contains(v)) {
    throw Error("value mechanism emitted a code outside the alphabet at t=" + std::to_string(q.t));
  }
  return v;
}

// One generative step at time t on top of `history`; appends the event and,
// when `log` is given, records it with its exogenous draws.
inline void step(const ScmSpec& spec, std::vector<Event>& history, std::size_t& node_count, std::int64_t t,
                 std::uint64_t seed, std::string_view stream, double world, EventLog* log) {
  const auto ue = derive_key(seed, std::string(stream) + "/e", {static_cast<std::uint64_t>(t)});
  PairQuery pq{History(history), t, node_count, ue, spec.directed};
  const auto pair = spec.pair_mechanism->next(pq);
  if (std::max(pair.first, pair.second) > node_count || (t == 1 && pair != NodePair{0, 0})) {
    throw Error("illegal pair emission at t=" + std::to_string(t));
  }
  const double ux = exo_x_draw(spec.exo_x, seed, std::string(stream) + "/x", t, pair, spec.directed);
  ValueQuery vq{History(history), pair, t, ux, world, spec.directed, spec.alphabet.size()};
  const auto value = checked_value(spec, vq);
  history.push_back({pair, value});
  node_count = std::max({node_count, pair.first + 1, pair.second + 1});
  if (log) {
    log->pairs.push_back(pair);
    log->values.push_back(value);
    log->exo_e.push_back(ue);
    log->exo_x.push_back(ux);
  }
}

}  // namespace detail

/// Observation process: relabel by pi, keep the latest value per pair,
/// symmetrize when undirected.
inline ObservedGraph observe(const ScmSpec& spec, const EventLog& log, const Permutation& pi) {
  const auto n = log.node_count();
  if (pi.size() != n) throw Error("permutation/graph size mismatch");
  ObservedGraph g(n, spec.directed, spec.alphabet, static_cast<std::int64_t>(log.size()));
  for (std::size_t k = 0; k < log.size(); ++k) {
    g.set(pi(log.pairs[k].first), pi(log.pairs[k].second), log.values[k]);
  }
  return g;
}

inline ScmRun run_scm(const ScmSpec& spec, std::int64_t t0, std::uint64_t seed, RunOptions options = {}) {
  if (t0 < 1) throw Error("observation time must be at least 1");
  ScmRun run;
  run.log.world = unit_at(seed, "world");
  std::vector<Event> history;
  history.reserve(static_cast<std::size_t>(t0));
  std::size_t nodes = 0;
  for (std::int64_t t = 1; t <= t0; ++t) {
    detail::step(spec, history, nodes, t, seed, "run", run.log.world, &run.log);
  }
  run.pi = Permutation::identity(nodes);
  if (options.shuffle) {
    std::vector<std::size_t> m(run.pi.mapping());
    Rng rng(derive_key(seed, "pi"));
    rng.shuffle(m);
    run.pi = Permutation(std::move(m));
  }
  run.graph = observe(spec, run.log, run.pi);
  return run;
}

inline ScmRun run_scm(const ScmSpec& spec, std::uint64_t seed, RunOptions options = {}) {
  return run_scm(spec, spec.observation_time, seed, options);
}

/// Sequential probes. Each probe forces E_t to the hidden pair behind the
/// observed pair and records f_X's value; later probes see earlier ones in
/// their history. With the time-gap invariance declared, intermediate steps
/// are skipped and the m-th probe is evaluated at time t0 + m; otherwise the
/// process's own mechanisms advance through every intermediate time.
inline ProbeSequence probe_sequence(const ScmSpec& spec, const EventLog& log, const Permutation& pi,
                                    const std::vector<NodePair>& pairs, const std::vector<std::int64_t>& times,
                                    std::uint64_t seed) {
  if (pairs.size() != times.size()) throw Error("probe pairs and times differ in length");
  const auto t0 = static_cast<std::int64_t>(log.size());
  ProbeSequence out;
  out.base_graph = observe(spec, log, pi);
  const auto inverse = pi.inverse();
  auto history = log.events();
  auto nodes = log.node_count();
  std::int64_t previous = t0;
  for (std::size_t m = 0; m < pairs.size(); ++m) {
    const auto t1 = times[m];
    if (t1 <= t0) throw Error("probe before observation");
    if (m > 0 && t1 <= times[m - 1]) throw Error("probe times must be strictly increasing");
    const auto [i, j] = pairs[m];
    if (i >= out.base_graph.size() || j >= out.base_graph.size()) throw Error("probe pair out of range");
    std::int64_t t_eval = t1;
    if (spec.flags.time_gap) {
      t_eval = t0 + static_cast<std::int64_t>(m) + 1;
    } else {
      for (std::int64_t t = previous + 1; t < t1; ++t) {
        detail::step(spec, history, nodes, t, seed, "probe-step", log.world, nullptr);
      }
    }
    previous = t1;
    const NodePair hidden{inverse(i), inverse(j)};
    const double u = detail::exo_x_draw(spec.exo_x, seed, "probe-x", t_eval, hidden, spec.directed);
    ValueQuery q{History(history), hidden, t_eval, u, log.world, spec.directed, spec.alphabet.size()};
    const auto y = detail::checked_value(spec, q);
    history.push_back({hidden, y});
    out.records.push_back({pairs[m], t1, y});
  }
  return out;
}

inline ProbeRecord probe(const ScmSpec& spec, const EventLog& log, const Permutation& pi, NodePair pair,
                         std::int64_t t1, std::uint64_t seed) {
  return probe_sequence(spec, log, pi, {pair}, {t1}, seed).records.front();
}

}  // namespace orbitlift
