// Command-line driver. Every subcommand reads a JSON config (merged over its
// defaults, then `--set key.path=value` overrides), writes its outputs and a
// manifest.json into --out, and exits 0 on success, 1 on usage or config
// errors and 2 on errors raised while running.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "orbitlift/orbitlift.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace orbitlift;

namespace {

constexpr const char* kVersion = "0.1.0";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void usage_error(const std::string& path, const std::string& msg) {
  throw UsageError("config error at " + path + ": " + msg);
}

// ---------------------------------------------------------------------------
// Config plumbing

// Keys whose value is passed through unchecked (validated by the library).
const std::set<std::string> kOpaque{"scm", "table", "pairs", "k", "pseudo_counts"};

void validate_keys(const json& user, const json& defaults, const std::string& path) {
  if (!user.is_object()) usage_error(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : user.items()) {
    const auto here = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) usage_error(here, "unknown field");
    const auto& d = defaults.at(key);
    if (d.is_object() && !kOpaque.count(key) && !value.is_null()) validate_keys(value, d, here);
  }
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key.path=value, got '" + assignment + "'");
  const auto path = assignment.substr(0, eq);
  const auto raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

template <class T>
T get(const json& cfg, const std::string& path) {
  const json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) usage_error(path, "missing field");
    node = &node->at(key);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    usage_error(path, "wrong type");
  }
}

struct Context {
  std::string command;
  json config;  // resolved
  std::uint64_t seed = 1;
  unsigned threads = 1;
  fs::path out;
  std::set<std::string> outputs;
  json results = json::object();

  std::ofstream open(const std::string& name) {
    outputs.insert(name);
    std::ofstream os(out / name, std::ios::binary);
    if (!os) throw Error("cannot write " + (out / name).string());
    os << std::setprecision(17);
    return os;
  }

  std::string run_id() const { return command + "-" + std::to_string(seed); }
};

void write_manifest(Context& ctx) {
  json m;
  m["tool"] = "orbitlift";
  m["version"] = kVersion;
  m["command"] = ctx.command;
  m["seed"] = ctx.seed;
  m["config"] = ctx.config;
  m["results"] = ctx.results;
  m["outputs"] = std::vector<std::string>(ctx.outputs.begin(), ctx.outputs.end());
  std::ofstream os(ctx.out / "manifest.json");
  os << m.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Shared I/O

ObservedGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph " + path);
  return read_edge_list(in);
}

void write_probes(std::ostream& os, const std::vector<ProbeRecord>& probes) {
  os << "i,j,time,outcome\n";
  for (const auto& r : probes) os << r.pair.first << ',' << r.pair.second << ',' << r.time << ',' << int(r.outcome) << '\n';
}

std::vector<ProbeRecord> read_probes(const std::string& path, const ObservedGraph& g) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open probes " + path);
  std::vector<ProbeRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 && line.rfind("i,", 0) == 0) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    long long i, j, t, y;
    if (!(ls >> i >> j >> t >> y) || i < 0 || j < 0 || static_cast<std::size_t>(std::max(i, j)) >= g.size() || y < 0 ||
        static_cast<std::size_t>(y) >= g.alphabet().size()) {
      throw Error(path + ":" + std::to_string(number) + ": malformed probe line");
    }
    out.push_back({{static_cast<std::size_t>(i), static_cast<std::size_t>(j)}, t, static_cast<EdgeValue>(y)});
  }
  return out;
}

Matrix read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open samples " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        if (rows.empty() && row.empty()) break;  // header
        throw Error(path + ":" + std::to_string(number) + ": non-numeric cell '" + cell + "'");
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(path + ":" + std::to_string(number) + ": row length differs from the first row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(path + ": no samples");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

/// Static SVG bar chart of one metric per method.
void write_bar_chart(std::ostream& os, const std::string& title, const std::string& metric,
                     const std::vector<std::pair<std::string, double>>& bars) {
  const double width = 120.0 * static_cast<double>(bars.size()) + 80, height = 320, base = 260, top = 50;
  double peak = 0;
  for (const auto& b : bars) peak = std::max(peak, b.second);
  if (peak <= 0) peak = 1;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<text x=\"14\" y=\"" << (base + top) / 2 << "\" transform=\"rotate(-90 14 " << (base + top) / 2
     << ")\" text-anchor=\"middle\">" << metric << "</text>\n";
  os << "<line x1=\"40\" y1=\"" << base << "\" x2=\"" << width - 20 << "\" y2=\"" << base << "\" stroke=\"black\"/>\n";
  for (std::size_t k = 0; k < bars.size(); ++k) {
    const double h = (base - top) * bars[k].second / peak;
    const double x = 60 + 120.0 * static_cast<double>(k);
    os << "<rect x=\"" << x << "\" y=\"" << base - h << "\" width=\"80\" height=\"" << h
       << "\" fill=\"#4c72b0\"/>\n";
    os << "<text x=\"" << x + 40 << "\" y=\"" << base - h - 4 << "\" text-anchor=\"middle\">" << bars[k].second
       << "</text>\n";
    os << "<text x=\"" << x + 40 << "\" y=\"" << base + 16 << "\" text-anchor=\"middle\">" << bars[k].first
       << "</text>\n";
  }
  os << "</svg>\n";
}

void write_method_outputs(Context& ctx, const std::string& title, const std::vector<tasks::MethodResult>& methods) {
  auto metrics = ctx.open("metrics.csv");
  write_metrics_csv(metrics, tasks::metric_rows(methods, ctx.run_id(), ctx.seed));
  std::vector<std::pair<std::string, double>> bars;
  for (const auto& m : methods) {
    bars.emplace_back(m.method, m.value);
    ctx.results[m.method] = m.value;
  }
  auto chart = ctx.open("chart.svg");
  const auto& first = methods.front();
  write_bar_chart(chart, title, first.metric == "hits" ? "Hits@" + std::to_string(first.k) : first.metric, bars);
}

/// ScmSpec::from_json with error paths rooted at the "scm" field.
ScmSpec parse_scm(const json& j) {
  try {
    return ScmSpec::from_json(j);
  } catch (const Error& e) {
    const std::string msg = e.what(), prefix = "config error at ";
    if (msg.rfind(prefix, 0) == 0) throw UsageError(prefix + "scm." + msg.substr(prefix.size()));
    throw;
  }
}

struct GraphSource {
  ObservedGraph graph;
  std::optional<ScmSpec> spec;
  std::optional<ScmRun> run;
};

/// "graph" (edge-list path) or "scm" (process run with the master seed).
GraphSource graph_source(Context& ctx) {
  GraphSource s;
  const auto& path = ctx.config.at("graph");
  const auto& scm = ctx.config.at("scm");
  if (path.is_string() && !path.get<std::string>().empty()) {
    s.graph = read_graph_file(path.get<std::string>());
  } else if (!scm.is_null()) {
    s.spec = parse_scm(scm);
    s.run = run_scm(*s.spec, derive_key(ctx.seed, "run"));
    s.graph = s.run->graph;
    auto os = ctx.open("graph.txt");
    write_edge_list(os, s.graph);
  } else {
    usage_error("graph", "either graph or scm is required");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Commands

json simulate_defaults() { return {{"scm", nullptr}, {"probes", 0}, {"shuffle", true}}; }

void cmd_simulate(Context& ctx) {
  if (ctx.config.at("scm").is_null()) usage_error("scm", "missing field");
  const auto spec = parse_scm(ctx.config.at("scm"));
  RunOptions ro;
  ro.shuffle = get<bool>(ctx.config, "shuffle");
  const auto run = run_scm(spec, derive_key(ctx.seed, "run"), ro);
  {
    auto os = ctx.open("graph.txt");
    write_edge_list(os, run.graph);
  }
  {
    auto os = ctx.open("events.csv");
    os << "t,hidden_i,hidden_j,value\n";
    for (std::size_t t = 0; t < run.log.size(); ++t) {
      os << t + 1 << ',' << run.log.pairs[t].first << ',' << run.log.pairs[t].second << ',' << int(run.log.values[t])
         << '\n';
    }
  }
  const auto count = get<std::size_t>(ctx.config, "probes");
  ctx.results["nodes"] = run.graph.size();
  ctx.results["observation_time"] = spec.observation_time;
  if (count == 0) return;
  const auto n = run.graph.size();
  if (n < 2) throw Error("probes need at least two nodes");
  Rng rng(derive_key(ctx.seed, "probe-pairs"));
  std::vector<NodePair> pairs;
  std::vector<std::int64_t> times;
  for (std::size_t m = 0; m < count; ++m) {
    NodePair p{rng.below(n), rng.below(n - 1)};
    if (p.second >= p.first) ++p.second;
    pairs.push_back(p);
    times.push_back(spec.observation_time + 1 + static_cast<std::int64_t>(m));
  }
  const auto probes = probe_sequence(spec, run.log, run.pi, pairs, times, derive_key(ctx.seed, "probes"));
  auto os = ctx.open("probes.csv");
  write_probes(os, probes.records);
}

json orbits_defaults() {
  return {{"graph", ""}, {"scm", nullptr}, {"probes", ""}, {"pseudo_counts", json::array({1, 1})}};
}

void cmd_orbits(Context& ctx) {
  const auto src = graph_source(ctx);
  const auto& g = src.graph;
  const auto group = automorphism_group(g);
  const auto p = orbits(g, group);
  {
    auto os = ctx.open("orbits.csv");
    write_orbits_csv(os, p);
  }
  {
    auto os = ctx.open("node_orbits.csv");
    os << "node,node_orbit_id\n";
    for (std::size_t v = 0; v < p.n; ++v) os << v << ',' << p.node_orbit[v] << '\n';
  }
  {
    auto os = ctx.open("generators.txt");
    write_group(os, group);
  }
  ctx.results["group_order"] = group.order_string();
  ctx.results["node_orbits"] = p.node_orbit_count;
  ctx.results["pair_orbits"] = p.pair_orbit_count;
  // A witness is two pairs with matching node orbits but different pair orbits.
  if (const auto w = is_pairwise_symmetric(g)) {
    ctx.results["pairwise_symmetric"] = false;
    ctx.results["witness"] = {w->i, w->j, w->u, w->v};
  } else {
    ctx.results["pairwise_symmetric"] = true;
  }
  const auto probes_path = get<std::string>(ctx.config, "probes");
  if (probes_path.empty()) return;
  ProbeSequence seq{read_probes(probes_path, g), g};
  const auto prior = get<std::vector<double>>(ctx.config, "pseudo_counts");
  const auto est = orbit_map_estimator(seq, p, prior);
  auto os = ctx.open("orbit_estimates.csv");
  os << "pair_orbit_id,probes,observed";
  for (std::size_t c = 0; c < prior.size(); ++c) os << ",p" << c;
  os << '\n';
  for (std::size_t o = 0; o < est.size(); ++o) {
    os << o << ',' << est[o].probes << ',' << (est[o].observed ? 1 : 0);
    for (auto x : est[o].probabilities) os << ',' << x;
    os << '\n';
  }
}

json lifting_defaults() {
  return {{"scm", nullptr},
          {"mode", "interventional"},
          {"pair", json::array({0, 1})},
          {"samples", 2000},
          {"alpha", 0.01},
          {"evidence", {{"pair", json::array({0, 1})}, {"outcome", 1}}},
          {"invariance_trials", 200}};
}

NodePair hidden_pair(const json& cfg, const std::string& path, const ScmRun& run) {
  const auto v = get<std::vector<std::size_t>>(cfg, path);
  if (v.size() != 2) usage_error(path, "expected [i, j]");
  if (std::max(v[0], v[1]) >= run.pi.size()) throw Error("probe pair out of range");
  return {v[0], v[1]};
}

void cmd_lifting_check(Context& ctx) {
  if (ctx.config.at("scm").is_null()) usage_error("scm", "missing field");
  const auto spec = parse_scm(ctx.config.at("scm"));
  const auto run = run_scm(spec, derive_key(ctx.seed, "run"));
  {
    auto os = ctx.open("graph.txt");
    write_edge_list(os, run.graph);
  }
  LiftingOptions lo;
  lo.alpha = get<double>(ctx.config, "alpha");
  lo.threads = ctx.threads;
  const auto mode = get<std::string>(ctx.config, "mode");
  const auto pair = hidden_pair(ctx.config, "pair", run);
  const auto samples = get<std::size_t>(ctx.config, "samples");
  LiftingReport r;
  if (mode == "interventional") {
    r = check_interventional_lifting(spec, run.graph, run.pi, run.log, pair, samples, derive_key(ctx.seed, "lift"), lo);
  } else if (mode == "counterfactual") {
    ProbeRecord evidence;
    evidence.pair = hidden_pair(ctx.config, "evidence.pair", run);
    evidence.time = spec.observation_time + 1;
    const auto y = get<int>(ctx.config, "evidence.outcome");
    if (y < 0 || static_cast<std::size_t>(y) >= spec.alphabet.size()) usage_error("evidence.outcome", "not a code");
    evidence.outcome = static_cast<EdgeValue>(y);
    r = check_counterfactual_lifting(spec, run.graph, run.pi, run.log, pair, evidence, samples,
                                     derive_key(ctx.seed, "lift"), lo);
    ctx.results["accepted_traces"] = r.accepted;
  } else {
    usage_error("mode", "expected \"interventional\" or \"counterfactual\"");
  }
  {
    auto os = ctx.open("lifting.csv");
    os << "member_i,member_j,outcome,count\n";
    for (std::size_t m = 0; m < r.members.size(); ++m) {
      for (std::size_t y = 0; y < r.histograms[m].size(); ++y) {
        os << r.members[m].first << ',' << r.members[m].second << ',' << y << ',' << r.histograms[m][y] << '\n';
      }
    }
  }
  ctx.results["members"] = r.members.size();
  ctx.results["comparisons"] = r.comparisons;
  ctx.results["min_p_value"] = r.min_p_value;
  ctx.results["pooled_rate"] = r.pooled_rate();
  ctx.results["lifting_passed"] = r.passed;

  const auto trials = get<std::size_t>(ctx.config, "invariance_trials");
  auto os = ctx.open("invariances.csv");
  os << "invariance,declared,passed,trials\n";
  const std::pair<Invariance, bool> declared[] = {{Invariance::time_gap, spec.flags.time_gap},
                                                  {Invariance::time_exch, spec.flags.time_exch},
                                                  {Invariance::nonlink_ign, spec.flags.nonlink_ign},
                                                  {Invariance::id_exch, spec.flags.id_exch}};
  for (const auto& [flag, on] : declared) {
    if (!on || trials == 0) {
      os << to_string(flag) << ',' << on << ",," << 0 << '\n';
      continue;
    }
    const auto rep = check_mechanism_invariance(spec, flag, trials, derive_key(ctx.seed, "invariance"));
    os << to_string(flag) << ",1," << rep.passed << ',' << rep.trials << '\n';
    ctx.results[std::string("invariance_") + to_string(flag)] = rep.passed;
    if (!rep.passed) std::cerr << rep << '\n';
  }
}

json svd_defaults() {
  return {{"graph", ""}, {"exhaustive_nodes", 4}, {"random_graphs", 500}, {"max_nodes", 7}, {"tolerance", 1e-7}};
}

void cmd_svd_check(Context& ctx) {
  const auto tol = get<double>(ctx.config, "tolerance");
  const auto path = get<std::string>(ctx.config, "graph");
  if (!path.empty()) {
    const auto g = read_graph_file(path);
    const auto r = svd_invariance_check(g, tol);
    auto os = ctx.open("svd_pairs.csv");
    os << "i,j,svd_equal,predicate\n";
    std::set<NodePair> eq(r.equal_pairs.begin(), r.equal_pairs.end());
    std::set<NodePair> pred(r.predicate_pairs.begin(), r.predicate_pairs.end());
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        os << i << ',' << j << ',' << eq.count({i, j}) << ',' << pred.count({i, j}) << '\n';
      }
    }
    ctx.results["disagreements"] = r.disagreements.size();
    return;
  }
  auto os = ctx.open("svd_check.csv");
  os << "source,index,n,equal_pairs,predicate_pairs,disagreements\n";
  std::size_t graphs = 0, bad = 0;
  auto check = [&](const char* source, std::size_t index, const ObservedGraph& g) {
    const auto r = svd_invariance_check(g, tol);
    os << source << ',' << index << ',' << g.size() << ',' << r.equal_pairs.size() << ',' << r.predicate_pairs.size()
       << ',' << r.disagreements.size() << '\n';
    ++graphs;
    bad += r.agrees() ? 0 : 1;
  };
  const auto n = get<std::size_t>(ctx.config, "exhaustive_nodes");
  if (n > 6) usage_error("exhaustive_nodes", "must be at most 6");
  const auto slots = n * (n - 1) / 2;
  for (std::size_t mask = 0; n >= 1 && mask < (std::size_t{1} << slots); ++mask) {
    ObservedGraph g(n, false);
    std::size_t bit = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j, ++bit) {
        if (mask >> bit & 1) g.set(i, j, 1);
      }
    }
    check("exhaustive", mask, g);
  }
  const auto count = get<std::size_t>(ctx.config, "random_graphs");
  const auto max_n = get<std::size_t>(ctx.config, "max_nodes");
  if (count && max_n < 1) usage_error("max_nodes", "must be at least 1");
  Rng rng(derive_key(ctx.seed, "svd-graphs"));
  for (std::size_t k = 0; k < count; ++k) {
    const auto m = 1 + rng.below(max_n);
    const double density = rng.uniform(0.2, 0.8);
    ObservedGraph g(m, false);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        if (rng.bernoulli(density)) g.set(i, j, 1);
      }
    }
    check("random", k, g);
  }
  ctx.results["graphs"] = graphs;
  ctx.results["graphs_with_disagreements"] = bad;
}

json train_defaults() {
  return {{"graph", ""},
          {"scm", nullptr},
          {"probes", ""},
          {"probe_count", 500},
          {"embedding", "labeled_wl"},
          {"node_embedding", "wl"},
          {"hash_dim", 64},
          {"wl_iterations", 3},
          {"svd_rank", 8},
          {"factorization", {{"dim", 8}, {"epochs", 200}, {"lr", 0.05}}},
          {"loss", "bce"},
          {"epochs", 200},
          {"lr", 0.01},
          {"batch", 32},
          {"optimizer", "sgd"},
          {"momentum", 0.9},
          {"checkpoint", "model.ckpt"}};
}

PairwiseEmbedding build_embedding(const Context& ctx, const ObservedGraph& g) {
  const auto& c = ctx.config;
  const auto kind = parse_pair_kind(get<std::string>(c, "embedding"));
  LabeledWlOptions wl;
  wl.dim = get<std::size_t>(c, "hash_dim");
  wl.iterations = get<int>(c, "wl_iterations");
  switch (kind) {
    case PairKind::labeled_wl: return PairwiseEmbedding::labeled_wl(g, wl);
    case PairKind::joint_features: return PairwiseEmbedding::joint(g);
    case PairKind::node_concat:
    case PairKind::node_hadamard: break;
  }
  const auto node = get<std::string>(c, "node_embedding");
  NodeEmbeddingTable table;
  if (node == "wl") {
    table = wl_node_colors(g, -1, wl.dim);
  } else if (node == "svd") {
    table = svd_embed(g, std::min(get<std::size_t>(c, "svd_rank"), g.size()));
  } else if (node == "one_hot") {
    table = one_hot_embed(g);
  } else if (node == "factorization") {
    FactorizationOptions fo;
    fo.dim = get<std::size_t>(c, "factorization.dim");
    fo.epochs = get<std::size_t>(c, "factorization.epochs");
    fo.lr = get<double>(c, "factorization.lr");
    fo.seed = derive_key(ctx.seed, "factorization");
    table = factorization_train(g, fo).table;
  } else {
    usage_error("node_embedding", "expected wl, svd, one_hot or factorization");
  }
  return PairwiseEmbedding::nodes(std::move(table), kind == PairKind::node_hadamard);
}

void write_predictions(std::ostream& os, const LinkModel& model, const std::vector<ProbeRecord>& probes) {
  os << "i,j,score,outcome\n";
  for (const auto& r : probes) {
    os << r.pair.first << ',' << r.pair.second << ',' << predict(model, r.pair) << ',' << int(r.outcome) << '\n';
  }
}

void cmd_train(Context& ctx) {
  const auto src = graph_source(ctx);
  const auto& g = src.graph;
  std::vector<ProbeRecord> probes;
  const auto probes_path = get<std::string>(ctx.config, "probes");
  if (!probes_path.empty()) {
    probes = read_probes(probes_path, g);
  } else if (src.run) {
    // Independent single probes on the observed trace.
    const auto n = g.size();
    if (n < 2) throw Error("probes need at least two nodes");
    Rng rng(derive_key(ctx.seed, "probe-pairs"));
    const auto t1 = src.spec->observation_time + 1;
    for (std::size_t m = 0, count = get<std::size_t>(ctx.config, "probe_count"); m < count; ++m) {
      NodePair p{rng.below(n), rng.below(n - 1)};
      if (p.second >= p.first) ++p.second;
      probes.push_back(probe(*src.spec, src.run->log, src.run->pi, p, t1, derive_key(ctx.seed, "probe", {m})));
    }
    auto os = ctx.open("probes.csv");
    write_probes(os, probes);
  } else {
    usage_error("probes", "a probe file is required with a graph file");
  }
  const auto loss = parse_loss(get<std::string>(ctx.config, "loss"));
  TrainOptions o;
  o.epochs = get<std::size_t>(ctx.config, "epochs");
  o.lr = get<double>(ctx.config, "lr");
  o.batch = get<std::size_t>(ctx.config, "batch");
  o.momentum = get<double>(ctx.config, "momentum");
  o.seed = derive_key(ctx.seed, "model");
  const auto opt = get<std::string>(ctx.config, "optimizer");
  if (opt == "sgd") {
    o.optimizer = Optimizer::sgd;
  } else if (opt == "adam") {
    o.optimizer = Optimizer::adam;
  } else {
    usage_error("optimizer", "expected \"sgd\" or \"adam\"");
  }
  const ProbeSequence seq{probes, g};
  const auto result = train(make_link_model(build_embedding(ctx, g), loss), seq, o);
  {
    auto os = ctx.open("losses.csv");
    os << "epoch,loss\n";
    for (std::size_t e = 0; e < result.report.losses.size(); ++e) os << e + 1 << ',' << result.report.losses[e] << '\n';
  }
  {
    auto os = ctx.open(get<std::string>(ctx.config, "checkpoint"));
    save_checkpoint(os, result.model);
  }
  {
    auto os = ctx.open("predictions.csv");
    write_predictions(os, result.model, probes);
  }
  std::ostringstream checksum;
  checksum << std::hex << result.report.checksum;
  ctx.results["weights_checksum"] = checksum.str();
  ctx.results["final_loss"] = result.report.losses.empty() ? 0.0 : result.report.losses.back();
  ctx.results["probes"] = probes.size();
}

json eval_defaults() { return {{"graph", ""}, {"checkpoint", ""}, {"pairs", ""}, {"k", json::array({10})}}; }

void cmd_eval(Context& ctx) {
  const auto graph_path = get<std::string>(ctx.config, "graph");
  const auto ckpt_path = get<std::string>(ctx.config, "checkpoint");
  const auto pairs_path = get<std::string>(ctx.config, "pairs");
  if (graph_path.empty()) usage_error("graph", "missing field");
  if (ckpt_path.empty()) usage_error("checkpoint", "missing field");
  if (pairs_path.empty()) usage_error("pairs", "missing field");
  const auto g = read_graph_file(graph_path);
  std::ifstream in(ckpt_path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + ckpt_path);
  const auto model = load_checkpoint(in, g);
  const auto probes = read_probes(pairs_path, g);
  {
    auto os = ctx.open("predictions.csv");
    write_predictions(os, model, probes);
  }
  std::vector<MetricRow> rows;
  double loss = 0;
  std::vector<ScoredPair> scores;
  for (const auto& r : probes) {
    const double p = predict(model, r.pair);
    if (model.loss == LossKind::bce) {
      const double y = r.outcome != kZero ? 1.0 : 0.0, q = std::clamp(p, 1e-12, 1 - 1e-12);
      loss -= y * std::log(q) + (1 - y) * std::log(1 - q);
    } else {
      const double d = p - g.alphabet().numeric(r.outcome);
      loss += d * d;
    }
    scores.push_back({r.pair, p, r.outcome != kZero});
  }
  if (!probes.empty()) loss /= static_cast<double>(probes.size());
  rows.push_back({ctx.run_id(), "checkpoint", to_string(model.loss), 0, loss, ctx.seed});
  ctx.results[to_string(model.loss)] = loss;
  for (auto k : get<std::vector<std::size_t>>(ctx.config, "k")) {
    if (k > scores.size()) continue;
    const auto h = hits_at_k(scores, k);
    rows.push_back({ctx.run_id(), "checkpoint", "hits", k, h, ctx.seed});
    ctx.results["hits@" + std::to_string(k)] = h;
  }
  auto os = ctx.open("metrics.csv");
  write_metrics_csv(os, rows);
}

json family_defaults() {
  const tasks::FamilyExperimentOptions d;
  return {{"forest",
           {{"n_trees", d.forest.n_trees},
            {"iso_fraction", d.forest.iso_fraction},
            {"max_size", d.forest.max_size},
            {"stop_probability", d.forest.stop_probability},
            {"max_depth", d.forest.max_depth},
            {"max_branching", d.forest.max_branching}}},
          {"experiment", true},
          {"hash_dim", d.hash_dim},
          {"wl_iterations", d.wl_iterations},
          {"factorization", {{"dim", d.factorization_dim}, {"epochs", d.factorization_epochs}, {"lr", d.factorization_lr}}},
          {"epochs", d.epochs},
          {"lr", d.lr},
          {"batch", d.batch},
          {"k_fraction", d.k_fraction}};
}

void cmd_family(Context& ctx) {
  const auto& c = ctx.config;
  tasks::FamilyExperimentOptions o;
  o.forest.n_trees = get<std::size_t>(c, "forest.n_trees");
  o.forest.iso_fraction = get<double>(c, "forest.iso_fraction");
  o.forest.max_size = get<std::size_t>(c, "forest.max_size");
  o.forest.stop_probability = get<double>(c, "forest.stop_probability");
  o.forest.max_depth = get<std::size_t>(c, "forest.max_depth");
  o.forest.max_branching = get<std::size_t>(c, "forest.max_branching");
  o.hash_dim = get<std::size_t>(c, "hash_dim");
  o.wl_iterations = get<int>(c, "wl_iterations");
  o.factorization_dim = get<std::size_t>(c, "factorization.dim");
  o.factorization_epochs = get<std::size_t>(c, "factorization.epochs");
  o.factorization_lr = get<double>(c, "factorization.lr");
  o.epochs = get<std::size_t>(c, "epochs");
  o.lr = get<double>(c, "lr");
  o.batch = get<std::size_t>(c, "batch");
  o.k_fraction = get<double>(c, "k_fraction");

  const auto kb = tasks::generate_family_forest(o.forest, derive_key(ctx.seed, "forest"));
  const auto relations = tasks::infer_relations(kb);
  {
    auto os = ctx.open("persons.csv");
    os << "person,gender,tree\n";
    for (std::size_t v = 0; v < kb.size(); ++v) {
      os << v << ',' << (kb.gender[v] == tasks::Gender::male ? "male" : "female") << ',' << kb.tree_of[v] << '\n';
    }
  }
  {
    auto os = ctx.open("relations.txt");
    tasks::write_relation_triples(os, relations);
  }
  ctx.results["persons"] = kb.size();
  ctx.results["planted_trees"] = kb.planted.size();
  if (kb.planted.empty()) return;
  const auto split = tasks::family_split(kb, relations, derive_key(ctx.seed, "split"));
  {
    auto os = ctx.open("split.csv");
    os << "split,i,j,positive,relation\n";
    for (const auto* part : {&split.train, &split.test}) {
      for (const auto& e : *part) {
        os << (part == &split.train ? "train" : "test") << ',' << e.pair.first << ',' << e.pair.second << ','
           << e.positive << ',' << e.relation << '\n';
      }
    }
  }
  if (!get<bool>(c, "experiment")) return;
  const auto r = tasks::run_family_experiment(kb, split, o, ctx.seed);
  ctx.results["train_pairs"] = r.train_pairs;
  ctx.results["test_pairs"] = r.test_pairs;
  write_method_outputs(ctx, "Family trees", r.methods);
}

json covariance_defaults() {
  const tasks::CovarianceExperimentOptions d;
  return {{"samples", ""},
          {"attributes", d.attributes},
          {"subjects", d.subjects},
          {"clusters", d.clusters},
          {"observed_subjects", d.task.observed_subjects},
          {"split_fraction", d.task.split_fraction},
          {"bins", d.task.bins},
          {"hash_dim", d.hash_dim},
          {"svd_rank", d.svd_rank},
          {"epochs", d.epochs},
          {"lr", d.lr},
          {"batch", d.batch}};
}

void cmd_covariance(Context& ctx) {
  const auto& c = ctx.config;
  tasks::CovarianceExperimentOptions o;
  o.attributes = get<std::size_t>(c, "attributes");
  o.subjects = get<std::size_t>(c, "subjects");
  o.clusters = get<std::size_t>(c, "clusters");
  o.task.observed_subjects = get<std::size_t>(c, "observed_subjects");
  o.task.split_fraction = get<double>(c, "split_fraction");
  o.task.bins = get<std::size_t>(c, "bins");
  o.hash_dim = get<std::size_t>(c, "hash_dim");
  o.svd_rank = get<std::size_t>(c, "svd_rank");
  o.epochs = get<std::size_t>(c, "epochs");
  o.lr = get<double>(c, "lr");
  o.batch = get<std::size_t>(c, "batch");
  const auto path = get<std::string>(c, "samples");
  const auto samples = path.empty() ? tasks::synthetic_covariance_samples(o.subjects, o.attributes, o.clusters,
                                                                          derive_key(ctx.seed, "samples"))
                                    : read_samples_csv(path);
  const auto task = tasks::build_covariance_task(samples, o.task, derive_key(ctx.seed, "task"));
  for (const auto& w : task.warnings) std::cerr << "warning: " << w << '\n';
  {
    auto os = ctx.open("pairs.csv");
    os << "i,j,role,observed,target\n";
    for (const auto& q : task.probes) os << q.pair.first << ',' << q.pair.second << ",probe," << q.observed << ',' << q.target << '\n';
    for (const auto& q : task.queries) os << q.pair.first << ',' << q.pair.second << ",query," << q.observed << ',' << q.target << '\n';
  }
  const auto r = tasks::run_covariance_experiment(task, o, ctx.seed);
  ctx.results["attributes"] = r.attributes;
  ctx.results["dropped_attributes"] = r.warnings.size();
  write_method_outputs(ctx, "Covariance refinement", r.methods);
}

json fisher_defaults() {
  const tasks::SimilarityExperimentOptions d;
  return {{"table", nullptr},
          {"train_probes", d.train_probes},
          {"test_probes", d.test_probes},
          {"high_rate", d.high_rate},
          {"low_rate", d.low_rate},
          {"hash_dim", d.hash_dim},
          {"epochs", d.epochs},
          {"lr", d.lr},
          {"k_neighbors", d.test.k_neighbors},
          {"alpha", d.test.alpha}};
}

void cmd_fisher(Context& ctx) {
  const auto& c = ctx.config;
  if (!c.at("table").is_null()) {
    const auto t = get<std::vector<std::uint64_t>>(c, "table");
    if (t.size() != 4) usage_error("table", "expected [a, b, c, d]");
    const auto p = fisher_exact({t[0], t[1], t[2], t[3]});
    auto os = ctx.open("fisher.csv");
    os << "a,b,c,d,p_value\n" << t[0] << ',' << t[1] << ',' << t[2] << ',' << t[3] << ',' << p << '\n';
    ctx.results["p_value"] = p;
    return;
  }
  tasks::SimilarityExperimentOptions o;
  o.train_probes = get<std::size_t>(c, "train_probes");
  o.test_probes = get<std::size_t>(c, "test_probes");
  o.high_rate = get<double>(c, "high_rate");
  o.low_rate = get<double>(c, "low_rate");
  o.hash_dim = get<std::size_t>(c, "hash_dim");
  o.epochs = get<std::size_t>(c, "epochs");
  o.lr = get<double>(c, "lr");
  o.test.k_neighbors = get<std::size_t>(c, "k_neighbors");
  o.test.alpha = get<double>(c, "alpha");
  o.test.threads = ctx.threads;
  const auto r = tasks::run_similarity_experiment(o, ctx.seed);
  {
    auto os = ctx.open("fisher.csv");
    os << "pairing,non_rejection_rate,tested,skipped\n";
    os << "similar," << r.similar_rate << ',' << r.tested << ',' << r.skipped << '\n';
    os << "random," << r.random_rate << ',' << r.tested << ',' << r.skipped << '\n';
  }
  ctx.results["similar_rate"] = r.similar_rate;
  ctx.results["random_rate"] = r.random_rate;
  ctx.results["tested"] = r.tested;
  auto chart = ctx.open("chart.svg");
  write_bar_chart(chart, "Structural similarity", "non-rejection rate",
                  {{"similar", r.similar_rate}, {"random", r.random_rate}});
}

struct Command {
  const char* name;
  const char* help;
  std::function<json()> defaults;
  std::function<void(Context&)> run;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list{
      {"simulate", "run the process and write the observed graph, trace and probes", simulate_defaults, cmd_simulate},
      {"orbits", "automorphism group, node and pair orbits, orbit estimates", orbits_defaults, cmd_orbits},
      {"lifting-check", "same-orbit probe distributions and mechanism invariances", lifting_defaults,
       cmd_lifting_check},
      {"svd-check", "SVD embedding equality against the same-neighbourhood predicate", svd_defaults, cmd_svd_check},
      {"train", "fit a link model on probes and write a checkpoint", train_defaults, cmd_train},
      {"eval", "score pairs with a checkpoint", eval_defaults, cmd_eval},
      {"family", "family-tree forest, relations, split and Hits@K experiment", family_defaults, cmd_family},
      {"covariance", "covariance refinement experiment", covariance_defaults, cmd_covariance},
      {"fisher", "Fisher exact test or the structural similarity protocol", fisher_defaults, cmd_fisher},
  };
  return list;
}

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 1;
  std::string out = "out";
  unsigned threads = 1;
  std::vector<std::string> overrides;
  CLI::Option* seed_option = nullptr;
};

int execute(const Command& cmd, const CommonArgs& args) {
  Context ctx;
  ctx.command = cmd.name;
  ctx.seed = args.seed;
  ctx.threads = std::max(1u, args.threads);
  json user = json::object();
  if (!args.config.empty()) {
    std::ifstream in(args.config);
    if (!in) throw UsageError("cannot open config " + args.config);
    user = json::parse(in, nullptr, false);
    if (user.is_discarded()) throw UsageError("config " + args.config + " is not valid JSON");
    if (user.is_object() && user.value("tool", "") == "orbitlift" && user.contains("config")) {
      // A manifest: rerun its command with its resolved config and seed.
      if (user.value("command", "") != cmd.name) {
        throw UsageError("manifest was written by '" + user.value("command", "") + "'");
      }
      if (!args.seed_option->count()) ctx.seed = user.at("seed").get<std::uint64_t>();
      user = user.at("config");
    }
  }
  for (const auto& s : args.overrides) apply_override(user, s);
  const auto defaults = cmd.defaults();
  validate_keys(user, defaults, "");
  ctx.config = defaults;
  for (const auto& [key, value] : user.items()) {
    if (defaults.at(key).is_object() && !kOpaque.count(key) && value.is_object()) {
      ctx.config[key].update(value);
    } else {
      ctx.config[key] = value;
    }
  }
  ctx.out = args.out;
  fs::create_directories(ctx.out);
  cmd.run(ctx);
  write_manifest(ctx);
  std::cout << ctx.results.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orbitlift: causal lifting and structural link prediction"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  CommonArgs args;
  std::map<CLI::App*, const Command*> by_app;
  for (const auto& cmd : commands()) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("-c,--config", args.config, "JSON config file or a manifest.json to rerun");
    sub->add_option("-s,--seed", args.seed, "master seed");
    sub->add_option("-o,--out", args.out, "output directory")->capture_default_str();
    sub->add_option("-t,--threads", args.threads, "worker threads")->capture_default_str();
    sub->add_option("--set", args.overrides, "config override key.path=value (repeatable)");
    by_app[sub] = &cmd;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  for (const auto& [sub, cmd] : by_app) {
    if (!sub->parsed()) continue;
    args.seed_option = sub->get_option("--seed");
    try {
      return execute(*cmd, args);
    } catch (const UsageError& e) {
      std::cerr << "orbitlift " << cmd->name << ": " << e.what() << '\n';
      return 1;
    } catch (const Error& e) {
      std::cerr << "orbitlift " << cmd->name << ": " << e.what() << '\n';
      return std::string(e.what()).rfind("config error", 0) == 0 ? 1 : 2;
    } catch (const std::exception& e) {
      std::cerr << "orbitlift " << cmd->name << ": " << e.what() << '\n';
      return 2;
    }
  }
  return 1;
}
