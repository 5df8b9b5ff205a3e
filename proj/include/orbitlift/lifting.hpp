#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "orbitlift/parallel.hpp"
#include "orbitlift/scm.hpp"
#include "orbitlift/stats.hpp"
#include "orbitlift/symmetry.hpp"

namespace orbitlift {

struct LiftingOptions {
  double alpha = 0.01;
  /// Probe time; 0 means t0 + 1.
  std::int64_t probe_time = 0;
  unsigned threads = 1;
};

/// Outcome histograms per orbit member and the pairwise homogeneity tests
/// between them (Bonferroni over all member pairs).
struct LiftingReport {
  NodePair pair;
  std::vector<NodePair> members;
  std::vector<std::vector<std::uint64_t>> histograms;  // member x outcome code
  std::size_t comparisons = 0;
  double min_p_value = 1;
  double alpha = 0.01;
  bool passed = true;
  // Counterfactual only.
  std::size_t traces = 0;
  std::size_t accepted = 0;

  /// Outcome frequency of `code` over all members together.
  double pooled_rate(EdgeValue code = 1) const {
    std::uint64_t total = 0, hits = 0;
    for (const auto& h : histograms) {
      for (auto c : h) total += c;
      hits += h[code];
    }
    return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
  }

  double rate(std::size_t member, EdgeValue code = 1) const {
    std::uint64_t total = 0;
    for (auto c : histograms[member]) total += c;
    return total ? static_cast<double>(histograms[member][code]) / static_cast<double>(total) : 0.0;
  }
};

namespace detail {

inline std::vector<NodePair> orbit_members(const ObservedGraph& g, NodePair pair) {
  if (pair.first >= g.size() || pair.second >= g.size()) throw Error("probe pair out of range");
  const auto partition = orbits(g, automorphism_group(g));
  auto members = partition.pair_members(partition.pair(pair));
  if (members.size() < 2) throw Error("lifting vacuous: trivial orbit");
  return members;
}

inline void compare_members(LiftingReport& r) {
  const auto m = r.members.size();
  r.comparisons = m * (m - 1) / 2;
  const double threshold = r.alpha / static_cast<double>(r.comparisons);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      const auto p = chi_square_homogeneity({r.histograms[a], r.histograms[b]}).p_value;
      r.min_p_value = std::min(r.min_p_value, p);
      if (p < threshold) r.passed = false;
    }
  }
}

}  // namespace detail

/// Monte Carlo check that every pair in the orbit of `pair` has the same
/// interventional outcome distribution. Each (sample, member) probe uses a
/// fresh exogenous stream on top of the given hidden trace.
inline LiftingReport check_interventional_lifting(const ScmSpec& spec, const ObservedGraph& g, const Permutation& pi,
                                                  const EventLog& log, NodePair pair, std::size_t n_samples,
                                                  std::uint64_t seed, LiftingOptions options = {}) {
  LiftingReport r;
  r.pair = pair;
  r.alpha = options.alpha;
  r.members = detail::orbit_members(g, pair);
  const auto t1 = options.probe_time ? options.probe_time : static_cast<std::int64_t>(log.size()) + 1;
  const auto k = spec.alphabet.size();
  std::vector<std::vector<EdgeValue>> outcomes(r.members.size(), std::vector<EdgeValue>(n_samples));
  parallel_for(r.members.size() * n_samples, options.threads, [&](std::size_t idx) {
    const auto m = idx / n_samples, s = idx % n_samples;
    outcomes[m][s] = probe(spec, log, pi, r.members[m], t1, derive_key(seed, "lift", {s, m})).outcome;
  });
  r.histograms.assign(r.members.size(), std::vector<std::uint64_t>(k, 0));
  for (std::size_t m = 0; m < r.members.size(); ++m) {
    for (auto y : outcomes[m]) ++r.histograms[m][y];
  }
  detail::compare_members(r);
  return r;
}

/// Rejection sampling over complete traces. A trace is kept when its
/// observed graph equals g and its probe at the evidence pair reproduces the
/// evidence outcome; the query probes then share that trace and its probe
/// exogenous stream, so they are counterfactual alternatives to the evidence
/// probe in the same world. Query members are the orbit of `pair` under the
/// automorphisms that fix both evidence endpoints.
inline LiftingReport check_counterfactual_lifting(const ScmSpec& spec, const ObservedGraph& g, const Permutation& pi,
                                                  const EventLog& log, NodePair pair, const ProbeRecord& evidence,
                                                  std::size_t n_samples, std::uint64_t seed,
                                                  LiftingOptions options = {}) {
  (void)pi;
  LiftingReport r;
  r.pair = pair;
  r.alpha = options.alpha;
  if (evidence.pair.first >= g.size() || evidence.pair.second >= g.size()) throw Error("probe pair out of range");
  r.members = detail::orbit_members(marked_graph(g, evidence.pair), pair);
  r.traces = n_samples;
  const auto t0 = static_cast<std::int64_t>(log.size());
  const auto t1 = evidence.time;
  if (t1 <= t0) throw Error("probe before observation");
  const auto k = spec.alphabet.size();
  std::vector<std::vector<EdgeValue>> outcomes(n_samples);
  parallel_for(n_samples, options.threads, [&](std::size_t s) {
    const auto run = run_scm(spec, t0, derive_key(seed, "cf-trace", {s}));
    if (!run.graph.same_adjacency(g)) return;
    const auto probe_seed = derive_key(seed, "cf-probe", {s});
    if (probe(spec, run.log, run.pi, evidence.pair, t1, probe_seed).outcome != evidence.outcome) return;
    outcomes[s].resize(r.members.size());
    for (std::size_t m = 0; m < r.members.size(); ++m) {
      outcomes[s][m] = probe(spec, run.log, run.pi, r.members[m], t1, probe_seed).outcome;
    }
  });
  r.histograms.assign(r.members.size(), std::vector<std::uint64_t>(k, 0));
  for (const auto& o : outcomes) {
    if (o.empty()) continue;
    ++r.accepted;
    for (std::size_t m = 0; m < o.size(); ++m) ++r.histograms[m][o[m]];
  }
  if (static_cast<double>(r.accepted) < 1e-3 * static_cast<double>(n_samples) || r.accepted == 0) {
    throw Error("evidence too improbable for rejection sampling");
  }
  detail::compare_members(r);
  return r;
}

}  // namespace orbitlift
