#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbitlift/error.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/isomorphism.hpp"
#include "orbitlift/rng.hpp"

namespace orbitlift {

using json = nlohmann::json;

/// One step of the generative trace: the pair chosen at time t and its value.
struct Event {
  NodePair pair;
  EdgeValue value = kZero;

  friend bool operator==(const Event&, const Event&) = default;
};

using History = std::span<const Event>;

inline std::size_t history_node_count(History h) {
  std::size_t m = 0;
  for (const auto& e : h) m = std::max({m, e.pair.first + 1, e.pair.second + 1});
  return m;
}

/// Graph of links generated so far: an entry holds the latest nonzero value
/// ever emitted for that pair, so later non-link events never erase a link.
/// Diagonal entries carry node attributes.
inline ObservedGraph link_graph(History h, bool directed, std::size_t alphabet, std::size_t min_nodes = 0) {
  ObservedGraph g(std::max(history_node_count(h), min_nodes), directed, Alphabet(alphabet));
  for (const auto& e : h) {
    if (e.value != kZero) g.set(e.pair.first, e.pair.second, e.value);
  }
  return g;
}

/// Copy of g whose diagonal also marks p.first (bit 0) and p.second (bit 1);
/// its automorphisms are exactly those of g fixing both endpoints.
inline ObservedGraph marked_graph(const ObservedGraph& g, NodePair p) {
  const auto a = g.alphabet().size();
  if (a * 4 > 256) throw Error("pair marking: alphabet too large");
  ObservedGraph marked(g.size(), g.directed(), Alphabet(a * 4));
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (i != j) marked.set(i, j, g.at(i, j));
    }
  }
  for (std::size_t v = 0; v < g.size(); ++v) {
    const unsigned mark = (v == p.first ? 1u : 0u) | (v == p.second ? 2u : 0u);
    marked.set(v, v, static_cast<EdgeValue>(g.at(v, v) * 4 + mark));
  }
  return marked;
}

/// Label-invariant key of the pair (i, j) in g: hex of the canonical form of
/// the marked graph. Equal keys for two pairs of the same graph means they
/// share a pair orbit.
inline std::string pair_orbit_key(const ObservedGraph& g, NodePair p) {
  const auto marked = marked_graph(g, p);
  const auto bytes = canonical_form(marked);
  static const char* digits = "0123456789abcdef";
  std::string hex;
  hex.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    hex.push_back(digits[c >> 4]);
    hex.push_back(digits[c & 15]);
  }
  return hex;
}

struct PairQuery {
  History history;
  std::int64_t t = 0;
  std::size_t node_count = 0;
  std::uint64_t u = 0;  // exogenous bits for this step
  bool directed = false;
};

struct ValueQuery {
  History history;  // events strictly before t
  NodePair pair;
  std::int64_t t = 0;
  double u = 0;       // local exogenous draw
  double shared = 0;  // world-level latent draw
  bool directed = false;
  std::size_t alphabet = 2;
};

class PairMechanism {
 public:
  virtual ~PairMechanism() = default;
  virtual NodePair next(const PairQuery& q) const = 0;
};

class ValueMechanism {
 public:
  virtual ~ValueMechanism() = default;
  virtual EdgeValue value(const ValueQuery& q) const = 0;
};

using PairMechanismPtr = std::shared_ptr<const PairMechanism>;
using ValueMechanismPtr = std::shared_ptr<const ValueMechanism>;

namespace mech {

inline double bits_unit(std::uint64_t u, std::uint64_t k) { return to_unit(hash_combine(u, k)); }

inline std::size_t bits_below(std::uint64_t u, std::uint64_t k, std::size_t bound) {
  return std::min(bound - 1, static_cast<std::size_t>(bits_unit(u, k) * static_cast<double>(bound)));
}

inline EdgeValue draw(double u, double p) { return u < p ? EdgeValue{1} : kZero; }

inline std::size_t pick_weighted(const std::vector<double>& weights, double u) {
  double acc = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return k;
  }
  return weights.size() - 1;
}

inline std::size_t degree(const ObservedGraph& g, std::size_t v) {
  if (v >= g.size()) return 0;
  std::size_t d = 0;
  for (std::size_t u = 0; u < g.size(); ++u) {
    if (u != v && (g.at(v, u) != kZero || g.at(u, v) != kZero)) ++d;
  }
  return d;
}

// ---- pair mechanisms ----

class ScriptPairs final : public PairMechanism {
 public:
  ScriptPairs(std::vector<NodePair> pairs, PairMechanismPtr then) : pairs_(std::move(pairs)), then_(std::move(then)) {}
  NodePair next(const PairQuery& q) const override {
    const auto k = static_cast<std::size_t>(q.t - 1);
    if (k < pairs_.size()) return pairs_[k];
    if (then_) return then_->next(q);
    return pairs_[k % pairs_.size()];
  }

 private:
  std::vector<NodePair> pairs_;
  PairMechanismPtr then_;
};

class RowMajor final : public PairMechanism {
 public:
  RowMajor(std::size_t nodes, bool directed) {
    for (std::size_t i = 0; i < nodes; ++i) {
      for (std::size_t j = directed ? 0 : i; j < nodes; ++j) order_.push_back({i, j});
    }
  }
  NodePair next(const PairQuery& q) const override {
    return order_[static_cast<std::size_t>(q.t - 1) % order_.size()];
  }

 private:
  std::vector<NodePair> order_;
};

class RandomGrowth final : public PairMechanism {
 public:
  RandomGrowth(std::size_t max_nodes, double p_new) : max_nodes_(max_nodes), p_new_(p_new) {}
  NodePair next(const PairQuery& q) const override {
    const auto m = q.node_count;
    if (m == 0) return {0, 0};
    if (m < max_nodes_ && (m < 2 || bits_unit(q.u, 0) < p_new_)) {
      return {bits_below(q.u, 1, m), m};
    }
    if (m < 2) return {0, 0};
    const auto i = bits_below(q.u, 2, m);
    auto j = bits_below(q.u, 3, m - 1);
    if (j >= i) ++j;
    return {std::min(i, j), std::max(i, j)};
  }

 private:
  std::size_t max_nodes_;
  double p_new_;
};

class HubGrowth final : public PairMechanism {
 public:
  explicit HubGrowth(std::size_t hub) : hub_(hub) {}
  NodePair next(const PairQuery& q) const override {
    if (q.node_count == 0) return {0, 0};
    return {std::min(hub_, q.node_count - 1), q.node_count};
  }

 private:
  std::size_t hub_;
};

class RepeatPair final : public PairMechanism {
 public:
  explicit RepeatPair(NodePair p) : p_(p) {}
  NodePair next(const PairQuery&) const override { return p_; }

 private:
  NodePair p_;
};

class PairByTime final : public PairMechanism {
 public:
  PairByTime(std::int64_t switch_at, PairMechanismPtr before, PairMechanismPtr after)
      : switch_at_(switch_at), before_(std::move(before)), after_(std::move(after)) {}
  NodePair next(const PairQuery& q) const override {
    return q.t < switch_at_ ? before_->next(q) : after_->next(q);
  }

 private:
  std::int64_t switch_at_;
  PairMechanismPtr before_, after_;
};

// ---- value mechanisms ----

class Constant final : public ValueMechanism {
 public:
  explicit Constant(EdgeValue v) : v_(v) {}
  EdgeValue value(const ValueQuery&) const override { return v_; }

 private:
  EdgeValue v_;
};

class Bernoulli final : public ValueMechanism {
 public:
  Bernoulli(double p, EdgeValue v) : p_(p), v_(v) {}
  EdgeValue value(const ValueQuery& q) const override { return q.u < p_ ? v_ : kZero; }

 private:
  double p_;
  EdgeValue v_;
};

class ScriptValues final : public ValueMechanism {
 public:
  explicit ScriptValues(std::vector<EdgeValue> values) : values_(std::move(values)) {}
  EdgeValue value(const ValueQuery& q) const override {
    return values_[static_cast<std::size_t>(q.t - 1) % values_.size()];
  }

 private:
  std::vector<EdgeValue> values_;
};

class OffDiagonal final : public ValueMechanism {
 public:
  explicit OffDiagonal(ValueMechanismPtr inner) : inner_(std::move(inner)) {}
  EdgeValue value(const ValueQuery& q) const override {
    return q.pair.first == q.pair.second ? kZero : inner_->value(q);
  }

 private:
  ValueMechanismPtr inner_;
};

class CommonNeighbors final : public ValueMechanism {
 public:
  CommonNeighbors(std::size_t threshold, EdgeValue v) : threshold_(threshold), v_(v) {}
  EdgeValue value(const ValueQuery& q) const override {
    const auto g = link_graph(q.history, q.directed, q.alphabet, std::max(q.pair.first, q.pair.second) + 1);
    std::size_t common = 0;
    for (std::size_t w = 0; w < g.size(); ++w) {
      if (w == q.pair.first || w == q.pair.second) continue;
      const bool a = g.at(q.pair.first, w) != kZero || g.at(w, q.pair.first) != kZero;
      const bool b = g.at(q.pair.second, w) != kZero || g.at(w, q.pair.second) != kZero;
      if (a && b) ++common;
    }
    return common >= threshold_ ? v_ : kZero;
  }

 private:
  std::size_t threshold_;
  EdgeValue v_;
};

class PreferentialAttachment final : public ValueMechanism {
 public:
  PreferentialAttachment(double base, double scale) : base_(base), scale_(scale) {}
  EdgeValue value(const ValueQuery& q) const override {
    const auto g = link_graph(q.history, q.directed, q.alphabet, std::max(q.pair.first, q.pair.second) + 1);
    const double d = static_cast<double>(degree(g, q.pair.first) + degree(g, q.pair.second));
    return draw(q.u, std::min(1.0, base_ + scale_ * d));
  }

 private:
  double base_, scale_;
};

/// Bernoulli rate looked up by hop distance between the endpoints in the
/// link graph; index 0 is the diagonal, `unreachable` covers disconnected
/// endpoints, and distances beyond the table use `fallback`.
class DistanceRates final : public ValueMechanism {
 public:
  DistanceRates(std::vector<double> by_distance, double unreachable, double fallback)
      : by_distance_(std::move(by_distance)), unreachable_(unreachable), fallback_(fallback) {}
  EdgeValue value(const ValueQuery& q) const override {
    const auto g = link_graph(q.history, q.directed, q.alphabet, std::max(q.pair.first, q.pair.second) + 1);
    const auto d = AdjacencyView(g).distances_from(q.pair.first)[q.pair.second];
    double p = fallback_;
    if (d == static_cast<std::size_t>(-1)) {
      p = unreachable_;
    } else if (d < by_distance_.size() && by_distance_[d] >= 0) {
      p = by_distance_[d];
    }
    return draw(q.u, p);
  }

 private:
  std::vector<double> by_distance_;  // negative = not specified
  double unreachable_, fallback_;
};

class DegreeRates final : public ValueMechanism {
 public:
  explicit DegreeRates(std::vector<double> rates) : rates_(std::move(rates)) {}
  EdgeValue value(const ValueQuery& q) const override {
    const auto g = link_graph(q.history, q.directed, q.alphabet, std::max(q.pair.first, q.pair.second) + 1);
    const auto d = degree(g, q.pair.first) + degree(g, q.pair.second);
    return draw(q.u, rates_[std::min(d, rates_.size() - 1)]);
  }

 private:
  std::vector<double> rates_;
};

/// Rate indexed by the total number of link events so far. Every earlier
/// probe that produced a link shifts later outcomes: an interfering mechanism.
class GlobalLinks final : public ValueMechanism {
 public:
  explicit GlobalLinks(std::vector<double> rates) : rates_(std::move(rates)) {}
  EdgeValue value(const ValueQuery& q) const override {
    std::size_t links = 0;
    for (const auto& e : q.history) {
      if (e.value != kZero && e.pair.first != e.pair.second) ++links;
    }
    return draw(q.u, rates_[std::min(links, rates_.size() - 1)]);
  }

 private:
  std::vector<double> rates_;
};

/// Rate keyed by the pair orbit key (see pair_orbit_key) of the probed pair
/// in the current link graph.
class OrbitRates final : public ValueMechanism {
 public:
  OrbitRates(std::map<std::string, double> rates, double fallback)
      : rates_(std::move(rates)), fallback_(fallback) {}
  EdgeValue value(const ValueQuery& q) const override {
    const auto g = link_graph(q.history, q.directed, q.alphabet, std::max(q.pair.first, q.pair.second) + 1);
    const auto it = rates_.find(pair_orbit_key(g, q.pair));
    return draw(q.u, it == rates_.end() ? fallback_ : it->second);
  }

 private:
  std::map<std::string, double> rates_;
  double fallback_;
};

/// Reads the smaller raw hidden id of the pair. Breaks id exchangeability.
class RawId final : public ValueMechanism {
 public:
  explicit RawId(std::vector<double> rates) : rates_(std::move(rates)) {}
  EdgeValue value(const ValueQuery& q) const override {
    const auto id = std::min(q.pair.first, q.pair.second);
    return draw(q.u, rates_[std::min(id, rates_.size() - 1)]);
  }

 private:
  std::vector<double> rates_;
};

/// Rate `hi` when the pair touches an endpoint of the chronologically first
/// off-diagonal link. Breaks invariance to event order.
class FirstLinkTouch final : public ValueMechanism {
 public:
  FirstLinkTouch(double hi, double lo) : hi_(hi), lo_(lo) {}
  EdgeValue value(const ValueQuery& q) const override {
    for (const auto& e : q.history) {
      if (e.value == kZero || e.pair.first == e.pair.second) continue;
      const bool touch = q.pair.first == e.pair.first || q.pair.first == e.pair.second ||
                         q.pair.second == e.pair.first || q.pair.second == e.pair.second;
      return draw(q.u, touch ? hi_ : lo_);
    }
    return draw(q.u, lo_);
  }

 private:
  double hi_, lo_;
};

/// Rate `hi` when the pair touches a node that took part in a non-link
/// event. Breaks invariance to the removal of non-links.
class NonlinkTouch final : public ValueMechanism {
 public:
  NonlinkTouch(double hi, double lo) : hi_(hi), lo_(lo) {}
  EdgeValue value(const ValueQuery& q) const override {
    for (const auto& e : q.history) {
      if (e.value != kZero || e.pair.first == e.pair.second) continue;
      const bool touch = q.pair.first == e.pair.first || q.pair.first == e.pair.second ||
                         q.pair.second == e.pair.first || q.pair.second == e.pair.second;
      if (touch) return draw(q.u, hi_);
    }
    return draw(q.u, lo_);
  }

 private:
  double hi_, lo_;
};

/// World-level latent component w ~ weights (from the shared draw), then
/// Bernoulli(rates[w]) from the local draw.
class LatentMixture final : public ValueMechanism {
 public:
  LatentMixture(std::vector<double> weights, std::vector<double> rates)
      : weights_(std::move(weights)), rates_(std::move(rates)) {}
  EdgeValue value(const ValueQuery& q) const override {
    return draw(q.u, rates_[pick_weighted(weights_, q.shared)]);
  }

 private:
  std::vector<double> weights_, rates_;
};

/// World-level latent row of a value table: X_t = values[row][t-1], ZERO
/// past the end of the row. Any finite distribution over traces of a fixed
/// pair schedule can be written this way.
class ValueTable final : public ValueMechanism {
 public:
  ValueTable(std::vector<double> weights, std::vector<std::vector<EdgeValue>> rows)
      : weights_(std::move(weights)), rows_(std::move(rows)) {}
  EdgeValue value(const ValueQuery& q) const override {
    const auto& row = rows_[pick_weighted(weights_, q.shared)];
    const auto k = static_cast<std::size_t>(q.t - 1);
    return k < row.size() ? row[k] : kZero;
  }

 private:
  std::vector<double> weights_;
  std::vector<std::vector<EdgeValue>> rows_;
};

class ValueByTime final : public ValueMechanism {
 public:
  ValueByTime(std::int64_t switch_at, ValueMechanismPtr before, ValueMechanismPtr after)
      : switch_at_(switch_at), before_(std::move(before)), after_(std::move(after)) {}
  EdgeValue value(const ValueQuery& q) const override {
    return q.t < switch_at_ ? before_->value(q) : after_->value(q);
  }

 private:
  std::int64_t switch_at_;
  ValueMechanismPtr before_, after_;
};

// ---- config parsing ----

[[noreturn]] inline void config_error(const std::string& path, const std::string& msg) {
  throw Error("config error at " + path + ": " + msg);
}

inline const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) config_error(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) config_error(path + "." + key, "missing field");
  return *it;
}

inline double number(const json& j, const std::string& path, const char* key,
                     std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    config_error(path + "." + key, "missing field");
  }
  const auto& v = j.at(key);
  if (!v.is_number()) config_error(path + "." + key, "expected a number");
  return v.get<double>();
}

inline double probability(const json& j, const std::string& path, const char* key,
                          std::optional<double> fallback = std::nullopt) {
  const double p = number(j, path, key, fallback);
  if (!(p >= 0 && p <= 1)) config_error(path + "." + key, "must be in [0, 1]");
  return p;
}

inline std::size_t count(const json& j, const std::string& path, const char* key,
                         std::optional<double> fallback = std::nullopt) {
  const double x = number(j, path, key, fallback);
  if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x))) {
    config_error(path + "." + key, "expected a non-negative integer");
  }
  return static_cast<std::size_t>(x);
}

inline std::vector<double> probabilities(const json& j, const std::string& path, const char* key) {
  const auto& v = field(j, path, key);
  const auto p = path + "." + key;
  if (!v.is_array() || v.empty()) config_error(p, "expected a non-empty array");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) config_error(p + "[" + std::to_string(k) + "]", "expected a number");
    const double x = v[k].get<double>();
    if (!(x >= 0 && x <= 1)) config_error(p + "[" + std::to_string(k) + "]", "must be in [0, 1]");
    out.push_back(x);
  }
  return out;
}

inline std::vector<double> check_weights(std::vector<double> w, const std::string& path) {
  double total = 0;
  for (auto x : w) total += x;
  if (std::abs(total - 1.0) > 1e-9) config_error(path, "weights must sum to 1");
  return w;
}

inline EdgeValue code(const json& v, const std::string& path, std::size_t alphabet) {
  if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() >= static_cast<long long>(alphabet)) {
    config_error(path, "expected a code in the alphabet");
  }
  return static_cast<EdgeValue>(v.get<long long>());
}

inline NodePair node_pair(const json& v, const std::string& path) {
  auto id = [](const json& x) { return x.is_number_integer() && x.get<long long>() >= 0; };
  if (!v.is_array() || v.size() != 2 || !id(v[0]) || !id(v[1])) {
    config_error(path, "expected a pair [i, j] of node ids");
  }
  return {static_cast<std::size_t>(v[0].get<long long>()), static_cast<std::size_t>(v[1].get<long long>())};
}

inline std::string type_of(const json& j, const std::string& path) {
  const auto& t = field(j, path, "type");
  if (!t.is_string()) config_error(path + ".type", "expected a string");
  return t.get<std::string>();
}

}  // namespace mech

struct MechanismContext {
  bool directed = false;
  std::size_t alphabet = 2;
};

inline PairMechanismPtr make_pair_mechanism(const json& j, const std::string& path, const MechanismContext& ctx) {
  using namespace mech;
  const auto type = type_of(j, path);
  if (type == "script") {
    const auto& arr = field(j, path, "pairs");
    if (!arr.is_array() || arr.empty()) config_error(path + ".pairs", "expected a non-empty array");
    std::vector<NodePair> pairs;
    for (std::size_t k = 0; k < arr.size(); ++k) {
      pairs.push_back(node_pair(arr[k], path + ".pairs[" + std::to_string(k) + "]"));
    }
    PairMechanismPtr then;
    if (j.contains("then")) then = make_pair_mechanism(j.at("then"), path + ".then", ctx);
    return std::make_shared<ScriptPairs>(std::move(pairs), std::move(then));
  }
  if (type == "row_major") {
    const auto nodes = count(j, path, "nodes");
    if (nodes == 0) config_error(path + ".nodes", "must be positive");
    return std::make_shared<RowMajor>(nodes, ctx.directed);
  }
  if (type == "random_growth") {
    const auto max_nodes = count(j, path, "max_nodes");
    if (max_nodes == 0) config_error(path + ".max_nodes", "must be positive");
    return std::make_shared<RandomGrowth>(max_nodes, probability(j, path, "p_new", 0.5));
  }
  if (type == "hub_growth") return std::make_shared<HubGrowth>(count(j, path, "hub", 0.0));
  if (type == "repeat") return std::make_shared<RepeatPair>(node_pair(field(j, path, "pair"), path + ".pair"));
  if (type == "by_time") {
    const auto at = static_cast<std::int64_t>(count(j, path, "switch_at"));
    return std::make_shared<PairByTime>(at, make_pair_mechanism(field(j, path, "before"), path + ".before", ctx),
                                        make_pair_mechanism(field(j, path, "after"), path + ".after", ctx));
  }
  config_error(path + ".type", "unknown pair mechanism '" + type + "'");
}

inline ValueMechanismPtr make_value_mechanism(const json& j, const std::string& path, const MechanismContext& ctx) {
  using namespace mech;
  const auto type = type_of(j, path);
  auto link_code = [&]() -> EdgeValue {
    return j.contains("value") ? code(j.at("value"), path + ".value", ctx.alphabet) : EdgeValue{1};
  };
  if (type == "constant") return std::make_shared<Constant>(code(field(j, path, "value"), path + ".value", ctx.alphabet));
  if (type == "bernoulli") return std::make_shared<Bernoulli>(probability(j, path, "p"), link_code());
  if (type == "script") {
    const auto& arr = field(j, path, "values");
    if (!arr.is_array() || arr.empty()) config_error(path + ".values", "expected a non-empty array");
    std::vector<EdgeValue> values;
    for (std::size_t k = 0; k < arr.size(); ++k) {
      values.push_back(code(arr[k], path + ".values[" + std::to_string(k) + "]", ctx.alphabet));
    }
    return std::make_shared<ScriptValues>(std::move(values));
  }
  if (type == "offdiag") {
    return std::make_shared<OffDiagonal>(make_value_mechanism(field(j, path, "inner"), path + ".inner", ctx));
  }
  if (type == "common_neighbors") {
    return std::make_shared<CommonNeighbors>(count(j, path, "threshold", 1.0), link_code());
  }
  if (type == "preferential_attachment") {
    return std::make_shared<PreferentialAttachment>(number(j, path, "base", 0.2), number(j, path, "scale", 0.2));
  }
  if (type == "distance_rates") {
    const auto& rates = field(j, path, "rates");
    if (!rates.is_object()) config_error(path + ".rates", "expected an object keyed by distance or \"inf\"");
    std::vector<double> by_distance;
    double unreachable = -1;
    for (const auto& [key, val] : rates.items()) {
      const auto p = path + ".rates." + key;
      if (!val.is_number() || val.get<double>() < 0 || val.get<double>() > 1) config_error(p, "must be in [0, 1]");
      if (key == "inf") {
        unreachable = val.get<double>();
        continue;
      }
      std::size_t pos = 0;
      std::size_t d = 0;
      try {
        d = std::stoul(key, &pos);
      } catch (...) {
        pos = 0;
      }
      if (pos != key.size() || key.empty()) config_error(p, "key must be a distance or \"inf\"");
      if (by_distance.size() <= d) by_distance.resize(d + 1, -1);
      by_distance[d] = val.get<double>();
    }
    const double fallback = probability(j, path, "default", 0.0);
    return std::make_shared<DistanceRates>(std::move(by_distance), unreachable < 0 ? fallback : unreachable, fallback);
  }
  if (type == "degree_rates") return std::make_shared<DegreeRates>(probabilities(j, path, "rates"));
  if (type == "global_links") return std::make_shared<GlobalLinks>(probabilities(j, path, "rates"));
  if (type == "orbit_rates") {
    const auto& rates = field(j, path, "rates");
    if (!rates.is_object()) config_error(path + ".rates", "expected an object keyed by pair orbit key");
    std::map<std::string, double> table;
    for (const auto& [key, val] : rates.items()) {
      if (!val.is_number() || val.get<double>() < 0 || val.get<double>() > 1) {
        config_error(path + ".rates." + key, "must be in [0, 1]");
      }
      table[key] = val.get<double>();
    }
    return std::make_shared<OrbitRates>(std::move(table), probability(j, path, "default", 0.0));
  }
  if (type == "raw_id") return std::make_shared<RawId>(probabilities(j, path, "rates"));
  if (type == "first_link_touch") {
    return std::make_shared<FirstLinkTouch>(probability(j, path, "hi"), probability(j, path, "lo"));
  }
  if (type == "nonlink_touch") {
    return std::make_shared<NonlinkTouch>(probability(j, path, "hi"), probability(j, path, "lo"));
  }
  if (type == "latent_mixture") {
    auto w = check_weights(probabilities(j, path, "weights"), path + ".weights");
    auto r = probabilities(j, path, "rates");
    if (r.size() != w.size()) config_error(path + ".rates", "must have one rate per weight");
    return std::make_shared<LatentMixture>(std::move(w), std::move(r));
  }
  if (type == "table") {
    const auto& entries = field(j, path, "entries");
    if (!entries.is_array() || entries.empty()) config_error(path + ".entries", "expected a non-empty array");
    std::vector<double> w;
    std::vector<std::vector<EdgeValue>> rows;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto p = path + ".entries[" + std::to_string(k) + "]";
      w.push_back(probability(entries[k], p, "weight"));
      const auto& vals = field(entries[k], p, "values");
      if (!vals.is_array()) config_error(p + ".values", "expected an array");
      std::vector<EdgeValue> row;
      for (std::size_t t = 0; t < vals.size(); ++t) {
        row.push_back(code(vals[t], p + ".values[" + std::to_string(t) + "]", ctx.alphabet));
      }
      rows.push_back(std::move(row));
    }
    w = check_weights(std::move(w), path + ".entries");
    return std::make_shared<ValueTable>(std::move(w), std::move(rows));
  }
  if (type == "by_time") {
    const auto at = static_cast<std::int64_t>(count(j, path, "switch_at"));
    return std::make_shared<ValueByTime>(at, make_value_mechanism(field(j, path, "before"), path + ".before", ctx),
                                         make_value_mechanism(field(j, path, "after"), path + ".after", ctx));
  }
  config_error(path + ".type", "unknown value mechanism '" + type + "'");
}

}  // namespace orbitlift
