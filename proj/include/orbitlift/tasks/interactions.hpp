#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "orbitlift/error.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/learning.hpp"
#include "orbitlift/rng.hpp"

namespace orbitlift::tasks {

struct Interaction {
  std::uint64_t user = 0, item = 0;
  std::int64_t time = 0;
};

struct TimeWindow {
  std::int64_t begin = 0, end = 0;  // [begin, end)
  bool contains(std::int64_t t) const { return t >= begin && t < end; }
};

/// Lines "user_id item_id timestamp"; blank lines and '#' comments skipped.
inline std::vector<Interaction> read_interactions(std::istream& is, const std::string& name = "interactions") {
  std::vector<Interaction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Interaction x;
    std::string extra;
    if (!(ls >> x.user >> x.item >> x.time) || (ls >> extra)) {
      throw Error(name + ":" + std::to_string(number) + ": malformed line");
    }
    out.push_back(x);
  }
  return out;
}

/// Lines "user_id group_label".
inline std::map<std::uint64_t, std::string> read_groups(std::istream& is, const std::string& name = "groups") {
  std::map<std::uint64_t, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::uint64_t user;
    std::string label, extra;
    if (!(ls >> user >> label) || (ls >> extra)) throw Error(name + ":" + std::to_string(number) + ": malformed line");
    out[user] = label;
  }
  return out;
}

struct InteractionOptions {
  TimeWindow observed, probe;
  std::string train_group;
};

struct InteractionData {
  ObservedGraph graph;  // users first, then items; undirected user-item links
  std::vector<std::uint64_t> user_ids, item_ids;
  std::vector<ProbeRecord> probes;   // training group
  std::vector<ProbeRecord> queries;  // every other user
};

/// Bipartite graph from the observed window. Positive probes are probe-window
/// interactions of training-group users; negatives are uniformly drawn
/// user-item pairs without any interaction, one per positive. Queries are
/// built the same way from the remaining users.
inline InteractionData build_interactions(const std::vector<Interaction>& rows,
                                          const std::map<std::uint64_t, std::string>& groups,
                                          const InteractionOptions& o, std::uint64_t seed) {
  std::set<std::uint64_t> users, items;
  bool any_observed = false, any_probe = false;
  for (const auto& x : rows) {
    any_observed |= o.observed.contains(x.time);
    any_probe |= o.probe.contains(x.time);
    if (o.observed.contains(x.time) || o.probe.contains(x.time)) {
      users.insert(x.user);
      items.insert(x.item);
    }
  }
  if (!any_observed || !any_probe) throw Error("empty time window");
  InteractionData d;
  d.user_ids.assign(users.begin(), users.end());
  d.item_ids.assign(items.begin(), items.end());
  std::map<std::uint64_t, std::size_t> user_node, item_node;
  for (std::size_t k = 0; k < d.user_ids.size(); ++k) user_node[d.user_ids[k]] = k;
  for (std::size_t k = 0; k < d.item_ids.size(); ++k) item_node[d.item_ids[k]] = d.user_ids.size() + k;
  d.graph = ObservedGraph(d.user_ids.size() + d.item_ids.size(), false);
  std::set<NodePair> touched;
  for (const auto& x : rows) {
    if (!o.observed.contains(x.time) && !o.probe.contains(x.time)) continue;
    const NodePair p{user_node[x.user], item_node[x.item]};
    touched.insert(p);
    if (o.observed.contains(x.time)) d.graph.set(p.first, p.second, 1);
  }

  auto in_train = [&](std::uint64_t user) {
    const auto it = groups.find(user);
    return it != groups.end() && it->second == o.train_group;
  };
  std::vector<std::size_t> train_users, other_users;
  for (std::size_t k = 0; k < d.user_ids.size(); ++k) (in_train(d.user_ids[k]) ? train_users : other_users).push_back(k);
  if (train_users.empty()) throw Error("empty probe group");

  Rng rng(derive_key(seed, "interactions"));
  const auto t1 = o.probe.begin;
  auto build = [&](const std::vector<std::size_t>& group, std::vector<ProbeRecord>& out) {
    std::set<NodePair> positives;
    std::set<std::size_t> members(group.begin(), group.end());
    for (const auto& x : rows) {
      if (!o.probe.contains(x.time)) continue;
      const NodePair p{user_node[x.user], item_node[x.item]};
      if (members.count(p.first)) positives.insert(p);
    }
    for (auto p : positives) out.push_back({p, t1, 1});
    if (group.empty() || d.item_ids.empty()) return;
    std::set<NodePair> negatives;
    std::size_t touched_here = 0;
    for (auto p : touched) touched_here += members.count(p.first);
    const auto available = group.size() * d.item_ids.size() - touched_here;
    const std::size_t wanted = std::min(positives.size(), available);
    std::size_t attempts = 0;
    while (negatives.size() < wanted && attempts++ < 1000 * (wanted + 1)) {
      const NodePair p{group[rng.below(group.size())], d.user_ids.size() + rng.below(d.item_ids.size())};
      if (!touched.count(p)) negatives.insert(p);
    }
    for (auto p : negatives) out.push_back({p, t1, kZero});
  };
  build(train_users, d.probes);
  build(other_users, d.queries);
  return d;
}

inline InteractionData load_interactions(const std::string& path, const std::string& group_path,
                                         const InteractionOptions& o, std::uint64_t seed) {
  std::ifstream in(path), gin(group_path);
  if (!in) throw Error("cannot open " + path);
  if (!gin) throw Error("cannot open " + group_path);
  return build_interactions(read_interactions(in, path), read_groups(gin, group_path), o, seed);
}

}  // namespace orbitlift::tasks
