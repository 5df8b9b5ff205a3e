#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbitlift/graph.hpp"

namespace orbitlift::tasks {

using nlohmann::json;

inline json all_flags(bool on) {
  return {{"time_gap", on}, {"time_exch", on}, {"nonlink_ign", on}, {"id_exch", on}, {"non_interfering", on}};
}

/// Script emitting the off-diagonal links `edges` with value 1. Nodes that
/// would appear two at a time are introduced first by a ZERO self-pair, as
/// the growth rule allows only one unseen node per step.
struct LinkScript {
  json pairs = json::array();
  std::vector<int> values;
};

inline LinkScript link_script(const std::vector<NodePair>& edges) {
  LinkScript s;
  std::size_t nodes = 0;
  auto emit = [&](std::size_t i, std::size_t j, int v) {
    s.pairs.push_back(json::array({i, j}));
    s.values.push_back(v);
    nodes = std::max({nodes, i + 1, j + 1});
  };
  emit(0, 0, 0);
  for (auto [i, j] : edges) {
    const auto lo = std::min(i, j), hi = std::max(i, j);
    while (nodes < lo) emit(nodes, nodes, 0);
    if (lo == nodes && hi > nodes) emit(nodes, nodes, 0);
    while (nodes < hi) emit(nodes, nodes, 0);
    emit(i, j, 1);
  }
  return s;
}

/// Process whose trace builds exactly `edges`, after which `after` (wrapped
/// so the diagonal stays ZERO) decides probe outcomes and the process itself
/// only re-emits (0,0) with ZERO, leaving the observed structure fixed.
inline json frozen_graph_config(const std::vector<NodePair>& edges, const json& after, bool flags_on = true) {
  const auto script = link_script(edges);
  const auto t0 = static_cast<int>(script.values.size());
  return {{"directed", false},
          {"alphabet", 2},
          {"observation_time", t0},
          {"flags", all_flags(flags_on)},
          {"pair_mechanism",
           {{"type", "script"}, {"pairs", script.pairs}, {"then", {{"type", "repeat"}, {"pair", {0, 0}}}}}},
          {"value_mechanism",
           {{"type", "by_time"},
            {"switch_at", t0 + 1},
            {"before", {{"type", "script"}, {"values", script.values}}},
            {"after", {{"type", "offdiag"}, {"inner", after}}}}}};
}

}  // namespace orbitlift::tasks
