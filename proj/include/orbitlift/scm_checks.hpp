#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "orbitlift/isomorphism.hpp"
#include "orbitlift/parallel.hpp"
#include "orbitlift/scm.hpp"
#include "orbitlift/stats.hpp"

namespace orbitlift {

// ---------------------------------------------------------------------------
// Exchangeability of observed graphs

struct ExchangeabilityOptions {
  bool shuffle = true;
  std::size_t min_class_samples = 50;
  unsigned threads = 1;
};

struct ExchangeabilityRow {
  std::size_t class_id = 0;
  std::string variant;  // row-major adjacency codes of the labelled graph
  std::uint64_t count = 0;
  double expected = 0;
  double p_value = 1;
};

struct ExchangeabilityClass {
  std::size_t class_id = 0;
  std::size_t nodes = 0;
  std::uint64_t samples = 0;
  std::size_t variants = 0;
  double max_deviation = 0;  // max |observed share - 1/variants|
  double p_value = 1;
  bool skipped = false;
};

struct ExchangeabilityReport {
  std::vector<ExchangeabilityClass> classes;
  std::vector<ExchangeabilityRow> rows;
  std::size_t skipped_classes = 0;

  bool passed(double alpha = 0.01) const {
    return std::all_of(classes.begin(), classes.end(),
                       [&](const ExchangeabilityClass& c) { return c.skipped || c.p_value > alpha; });
  }

  void write_csv(std::ostream& os) const {
    os << "class_id,labeled_variant,count,expected,p_value\n";
    for (const auto& r : rows) {
      os << r.class_id << ',' << r.variant << ',' << r.count << ',' << r.expected << ',' << r.p_value << '\n';
    }
  }
};

namespace detail {

inline std::string adjacency_label(const ObservedGraph& g) {
  std::string out;
  for (auto c : g.raw()) {
    if (g.alphabet().size() <= 10) {
      out += static_cast<char>('0' + c);
    } else {
      if (!out.empty()) out += '.';
      out += std::to_string(c);
    }
  }
  return out;
}

/// Every distinct labelled graph isomorphic to g (brute force over S_n).
inline std::vector<ObservedGraph> labelled_variants(const ObservedGraph& g) {
  std::vector<std::size_t> m(g.size());
  std::iota(m.begin(), m.end(), std::size_t{0});
  std::map<std::string, ObservedGraph> seen;
  do {
    auto h = apply_permutation(Permutation(m), g);
    seen.emplace(h.serialize(), std::move(h));
  } while (std::next_permutation(m.begin(), m.end()));
  std::vector<ObservedGraph> out;
  for (auto& [k, h] : seen) out.push_back(std::move(h));
  return out;
}

}  // namespace detail

/// Runs the process n_samples times and tests, within each isomorphism
/// class of observed graphs, that every labelled representative is equally
/// frequent (chi-square goodness of fit).
inline ExchangeabilityReport check_exchangeability(const ScmSpec& spec, std::int64_t t0, std::size_t n_samples,
                                                   std::uint64_t seed, ExchangeabilityOptions options = {}) {
  std::vector<std::string> canon(n_samples), labelled(n_samples);
  std::vector<ObservedGraph> graphs(n_samples);
  parallel_for(n_samples, options.threads, [&](std::size_t k) {
    auto run = run_scm(spec, t0, derive_key(seed, "exch", {k}), {options.shuffle});
    canon[k] = canonical_form(run.graph);
    labelled[k] = run.graph.serialize();
    graphs[k] = std::move(run.graph);
  });

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t k = 0; k < n_samples; ++k) by_class[canon[k]].push_back(k);

  ExchangeabilityReport report;
  std::size_t class_id = 0;
  for (const auto& [key, members] : by_class) {
    ExchangeabilityClass c;
    c.class_id = class_id++;
    c.samples = members.size();
    const auto& rep = graphs[members.front()];
    c.nodes = rep.size();
    if (members.size() < options.min_class_samples) {
      c.skipped = true;
      ++report.skipped_classes;
      report.classes.push_back(c);
      continue;
    }
    const auto variants = detail::labelled_variants(rep);
    c.variants = variants.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t v = 0; v < variants.size(); ++v) index[variants[v].serialize()] = v;
    std::vector<std::uint64_t> counts(variants.size(), 0);
    for (auto k : members) ++counts.at(index.at(labelled[k]));
    const std::vector<double> probs(variants.size(), 1.0 / static_cast<double>(variants.size()));
    c.p_value = chi_square_gof(counts, probs).p_value;
    const double expected = static_cast<double>(c.samples) / static_cast<double>(variants.size());
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const double share = static_cast<double>(counts[v]) / static_cast<double>(c.samples);
      c.max_deviation = std::max(c.max_deviation, std::abs(share - probs[v]));
      report.rows.push_back({c.class_id, detail::adjacency_label(variants[v]), counts[v], expected, c.p_value});
    }
    report.classes.push_back(c);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Mechanism invariances

enum class Invariance { time_gap, time_exch, nonlink_ign, id_exch };

inline const char* to_string(Invariance f) {
  switch (f) {
    case Invariance::time_gap: return "time_gap";
    case Invariance::time_exch: return "time_exch";
    case Invariance::nonlink_ign: return "nonlink_ign";
    case Invariance::id_exch: return "id_exch";
  }
  return "?";
}

inline Invariance parse_invariance(const std::string& s) {
  if (s == "time_gap") return Invariance::time_gap;
  if (s == "time_exch") return Invariance::time_exch;
  if (s == "nonlink_ign") return Invariance::nonlink_ign;
  if (s == "id_exch") return Invariance::id_exch;
  throw Error("unknown invariance '" + s + "'");
}

struct InvarianceCounterexample {
  std::vector<Event> history;
  NodePair pair;
  std::int64_t time = 0;
  EdgeValue outcome = kZero;
  std::vector<Event> transformed_history;
  NodePair transformed_pair;
  std::int64_t transformed_time = 0;
  EdgeValue transformed_outcome = kZero;
};

struct InvarianceReport {
  Invariance flag = Invariance::time_gap;
  std::size_t trials = 0;
  bool passed = true;
  std::optional<InvarianceCounterexample> counterexample;
};

inline std::ostream& operator<<(std::ostream& os, const std::vector<Event>& h) {
  for (std::size_t k = 0; k < h.size(); ++k) {
    os << (k ? " " : "") << '(' << h[k].pair.first << ',' << h[k].pair.second << ")=" << int(h[k].value);
  }
  return os;
}

inline std::ostream& operator<<(std::ostream& os, const InvarianceReport& r) {
  os << to_string(r.flag) << ": " << (r.passed ? "pass" : "FAIL") << " over " << r.trials << " trials";
  if (r.counterexample) {
    const auto& c = *r.counterexample;
    os << "\n  history    [" << c.history << "] probe (" << c.pair.first << ',' << c.pair.second << ")@" << c.time
       << " -> " << int(c.outcome) << "\n  transformed [" << c.transformed_history << "] probe ("
       << c.transformed_pair.first << ',' << c.transformed_pair.second << ")@" << c.transformed_time << " -> "
       << int(c.transformed_outcome);
  }
  return os;
}

/// Evaluates f_X on histories produced by the process itself, before and
/// after the transformation the invariance licenses, with the exogenous
/// draw held fixed. Reports the first disagreement.
///   time_gap    : insert 1-4 further steps of the process before the probe
///   time_exch   : shuffle the order of the history
///   nonlink_ign : delete every non-link event
///   id_exch     : relabel node ids by a random permutation
inline InvarianceReport check_mechanism_invariance(const ScmSpec& spec, Invariance flag, std::size_t trials,
                                                   std::uint64_t seed) {
  InvarianceReport report;
  report.flag = flag;
  report.trials = trials;
  const auto t0 = spec.observation_time;
  for (std::size_t k = 0; k < trials; ++k) {
    const auto trial_seed = derive_key(seed, "invariance", {k});
    const auto run = run_scm(spec, t0, trial_seed, {false});
    auto history = run.log.events();
    auto nodes = run.log.node_count();
    Rng rng(derive_key(trial_seed, "trial"));
    NodePair pair{rng.below(nodes), rng.below(nodes)};
    if (nodes > 1) {
      while (pair.second == pair.first) pair.second = rng.below(nodes);
    }
    const double u = rng.uniform();
    const std::int64_t t = t0 + 1;
    auto evaluate = [&](const std::vector<Event>& h, NodePair p, std::int64_t at) {
      return detail::checked_value(
          spec, ValueQuery{History(h), p, at, u, run.log.world, spec.directed, spec.alphabet.size()});
    };
    const auto before = evaluate(history, pair, t);

    auto transformed = history;
    auto tpair = pair;
    auto tt = t;
    switch (flag) {
      case Invariance::time_gap: {
        const auto gap = static_cast<std::int64_t>(1 + rng.below(4));
        for (std::int64_t s = 0; s < gap; ++s) {
          detail::step(spec, transformed, nodes, t + s, trial_seed, "gap", run.log.world, nullptr);
        }
        tt = t + gap;
        break;
      }
      case Invariance::time_exch:
        rng.shuffle(transformed);
        break;
      case Invariance::nonlink_ign:
        std::erase_if(transformed, [](const Event& e) { return e.value == kZero; });
        break;
      case Invariance::id_exch: {
        std::vector<std::size_t> m(nodes);
        std::iota(m.begin(), m.end(), std::size_t{0});
        rng.shuffle(m);
        for (auto& e : transformed) e.pair = {m[e.pair.first], m[e.pair.second]};
        tpair = {m[pair.first], m[pair.second]};
        break;
      }
    }
    const auto after = evaluate(transformed, tpair, tt);
    if (after != before) {
      report.passed = false;
      report.counterexample = InvarianceCounterexample{history, pair, t, before, transformed, tpair, tt, after};
      return report;
    }
  }
  return report;
}

}  // namespace orbitlift
