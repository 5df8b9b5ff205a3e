#pragma once

// Process configurations shared by the tests and the acceptance binary.

#include <algorithm>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/mechanisms.hpp"
#include "orbitlift/scm.hpp"
#include "orbitlift/tasks/synthetic.hpp"

namespace fixtures {

using nlohmann::json;
using orbitlift::NodePair;

inline json flags(bool all) { return orbitlift::tasks::all_flags(all); }

using orbitlift::tasks::link_script;

inline json frozen_graph(const std::vector<NodePair>& edges, const json& after, bool all_flags = true) {
  return orbitlift::tasks::frozen_graph_config(edges, after, all_flags);
}

inline const std::vector<NodePair> kTwoTriangles{{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}};
inline const std::vector<NodePair> kTriangle{{0, 1}, {1, 2}, {0, 2}};
inline const std::vector<NodePair> kPath3{{0, 1}, {1, 2}};
inline const std::vector<NodePair> kCycle4{{0, 1}, {1, 2}, {2, 3}, {0, 3}};
inline const std::vector<NodePair> kStar3{{0, 1}, {0, 2}, {0, 3}};
inline const std::vector<NodePair> kTwoEdges{{0, 1}, {2, 3}};

inline orbitlift::ObservedGraph graph_of(std::size_t n, const std::vector<NodePair>& edges) {
  orbitlift::ObservedGraph g(n, false);
  for (auto [i, j] : edges) g.set(i, j, 1);
  return g;
}

}  // namespace fixtures
