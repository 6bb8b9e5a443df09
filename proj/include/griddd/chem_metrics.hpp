#pragma once

// Minimal chemistry on labelled graphs: valence validity, molecular weight,
// connected components, path-hash fingerprints and the evaluation protocols
// built on them.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "griddd/error.hpp"
#include "griddd/graph.hpp"

namespace griddd {

struct ValenceTable {
  std::map<std::string, int> max_valence;
  std::map<std::string, double> mass;
  std::map<std::string, int> bond_order;

  static ValenceTable standard() {
    ValenceTable t;
    t.max_valence = {{"C", 4}, {"N", 3}, {"O", 2}, {"F", 1}, {"N+", 4}, {"O-", 1}};
    t.mass = {{"C", 12.011}, {"N", 14.007}, {"O", 15.999}, {"F", 18.998}, {"N+", 14.007}, {"O-", 15.999}};
    t.bond_order = {{"no-bond", 0}, {"single", 1}, {"double", 2}, {"triple", 3}};
    return t;
  }

  /// Throws unless every proper label of the space has an entry.
  void check_covers(const CategorySpace& cs) const {
    for (const auto& a : cs.node_types())
      if (!max_valence.count(a) || !mass.count(a)) throw Error("unknown atom label '" + a + "'");
    for (const auto& b : cs.edge_types())
      if (!bond_order.count(b)) throw Error("unknown bond label '" + b + "'");
  }
};

namespace detail {

inline void require_clean(const GraphState& g) {
  if (g.has_reserved()) throw Error("metric needs a graph without DEL/DEL* entries");
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

}  // namespace detail

inline int connected_components(const GraphState& g) {
  detail::require_clean(g);
  const int n = g.size();
  detail::UnionFind uf(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (g.edge(i, j) != g.space().no_bond()) uf.unite(i, j);
  int count = 0;
  for (int i = 0; i < n; ++i) count += uf.find(i) == i;
  return count;
}

struct Validity {
  bool valid = false;
  std::string reason;  // "valence", "disconnected", "empty" or ""
};

inline Validity check_validity(const GraphState& g, const ValenceTable& table, bool require_connected = true) {
  detail::require_clean(g);
  const CategorySpace& cs = g.space();
  table.check_covers(cs);
  if (g.empty()) return {false, "empty"};
  for (int i = 0; i < g.size(); ++i) {
    int total = 0;
    for (int j = 0; j < g.size(); ++j)
      if (j != i) total += table.bond_order.at(cs.edge_label(g.edge(i, j)));
    if (total > table.max_valence.at(cs.node_label(g.node(i)))) return {false, "valence"};
  }
  if (require_connected && connected_components(g) != 1) return {false, "disconnected"};
  return {true, ""};
}

inline double molecular_weight(const GraphState& g, const ValenceTable& table) {
  detail::require_clean(g);
  double w = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    const std::string label = g.space().node_label(g.node(i));
    const auto it = table.mass.find(label);
    if (it == table.mass.end()) throw Error("unknown atom label '" + label + "'");
    w += it->second;
  }
  return w;
}

struct Fingerprint {
  std::vector<std::uint64_t> words;
  int bits = 0;

  explicit Fingerprint(int nbits = 2048) : words(static_cast<std::size_t>((nbits + 63) / 64), 0), bits(nbits) {}
  void set(int b) { words[static_cast<std::size_t>(b / 64)] |= std::uint64_t{1} << (b % 64); }
  bool test(int b) const { return (words[static_cast<std::size_t>(b / 64)] >> (b % 64)) & 1U; }
  int count() const {
    int c = 0;
    for (auto w : words) c += std::popcount(w);
    return c;
  }
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Bits from every simple path of up to max_len bonds, written as
/// atom/bond/atom... label strings in the smaller of its two directions.
inline Fingerprint fingerprint(const GraphState& g, int nbits = 2048, int max_len = 7) {
  detail::require_clean(g);
  const CategorySpace& cs = g.space();
  Fingerprint fp(nbits);
  const int n = g.size();
  std::vector<int> path;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  auto emit = [&] {
    std::string fwd, rev;
    for (std::size_t k = 0; k < path.size(); ++k) {
      if (k) fwd += "-" + cs.edge_label(g.edge(path[k - 1], path[k])) + "-";
      fwd += cs.node_label(g.node(path[k]));
    }
    for (std::size_t k = path.size(); k-- > 0;) {
      if (k + 1 < path.size()) rev += "-" + cs.edge_label(g.edge(path[k + 1], path[k])) + "-";
      rev += cs.node_label(g.node(path[k]));
    }
    fp.set(static_cast<int>(fnv1a(std::min(fwd, rev)) % static_cast<std::uint64_t>(nbits)));
  };
  std::function<void(int)> extend = [&](int v) {
    emit();
    if (static_cast<int>(path.size()) > max_len) return;
    for (int w = 0; w < n; ++w) {
      if (used[static_cast<std::size_t>(w)] || g.edge(v, w) == cs.no_bond()) continue;
      used[static_cast<std::size_t>(w)] = true;
      path.push_back(w);
      extend(w);
      path.pop_back();
      used[static_cast<std::size_t>(w)] = false;
    }
  };
  for (int s = 0; s < n; ++s) {
    used[static_cast<std::size_t>(s)] = true;
    path = {s};
    extend(s);
    used[static_cast<std::size_t>(s)] = false;
  }
  return fp;
}

inline double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.bits != b.bits) throw Error("fingerprint length mismatch");
  int inter = 0, uni = 0;
  for (std::size_t k = 0; k < a.words.size(); ++k) {
    inter += std::popcount(a.words[k] & b.words[k]);
    uni += std::popcount(a.words[k] | b.words[k]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / uni;
}

inline double similarity(const GraphState& a, const GraphState& b) { return tanimoto(fingerprint(a), fingerprint(b)); }

struct ComponentStats {
  double avg_nc = 0.0;
  int max_nc = 0;
  int nsc = 0;  // graphs with exactly one component
  int count = 0;
};

inline ComponentStats component_stats(const std::vector<GraphState>& graphs) {
  ComponentStats s;
  s.count = static_cast<int>(graphs.size());
  long total = 0;
  for (const auto& g : graphs) {
    const int nc = connected_components(g);
    total += nc;
    s.max_nc = std::max(s.max_nc, nc);
    s.nsc += nc == 1;
  }
  if (s.count) s.avg_nc = static_cast<double>(total) / s.count;
  return s;
}

struct MaeReport {
  std::optional<double> mae;  // empty when no sample is valid
  double validity = 0.0;
  int valid = 0;
  int total = 0;
};

/// Mean |y - property(G)| over valid generated graphs, for every target and
/// `per_target` draws of generator(y, draw).
inline MaeReport mae_protocol(const std::vector<double>& targets, int per_target,
                              const std::function<GraphState(double, int)>& generator,
                              const std::function<double(const GraphState&)>& property,
                              const std::function<bool(const GraphState&)>& is_valid) {
  MaeReport r;
  double err = 0.0;
  for (double y : targets)
    for (int k = 0; k < per_target; ++k) {
      const GraphState g = generator(y, k);
      ++r.total;
      if (!is_valid(g)) continue;
      ++r.valid;
      err += std::abs(y - property(g));
    }
  if (r.total) r.validity = static_cast<double>(r.valid) / r.total;
  if (r.valid) r.mae = err / r.valid;
  return r;
}

struct SeedOutcome {
  double improvement = 0.0;  // best property gain among passing candidates; 0 if none passes
  double similarity = 0.0;   // similarity of the chosen candidate
  bool passed = false;
  bool success = false;
};

struct OptimizationReport {
  std::vector<SeedOutcome> seeds;
  double mean_improvement = 0.0;
  double std_improvement = 0.0;
  double mean_similarity = 0.0;  // over seeds with a passing candidate
  double pass_rate = 0.0;
  double success_rate = 0.0;
  double diversity = 0.0;
};

struct OptimizationCriteria {
  double delta = 0.4;       // similarity threshold in improvement mode
  double success_lo = 0.0;  // property window in success mode
  double success_hi = 0.0;
  double success_similarity = 0.4;
};

inline OptimizationReport optimization_protocol(const std::vector<GraphState>& seeds,
                                                const std::vector<std::vector<GraphState>>& candidates,
                                                const std::function<double(const GraphState&)>& property,
                                                const OptimizationCriteria& crit) {
  if (seeds.size() != candidates.size()) throw Error("one candidate list per seed is required");
  OptimizationReport r;
  std::vector<Fingerprint> successful;
  double sim_total = 0.0;
  int passed = 0, succeeded = 0;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const Fingerprint f0 = fingerprint(seeds[s]);
    const double y0 = property(seeds[s]);
    SeedOutcome o;
    for (const auto& c : candidates[s]) {
      const Fingerprint fc = fingerprint(c);
      const double sim = tanimoto(f0, fc);
      const double y = property(c);
      if (sim >= crit.delta && (!o.passed || y - y0 > o.improvement)) {
        o.passed = true;
        o.improvement = y - y0;
        o.similarity = sim;
      }
      if (sim >= crit.success_similarity && y >= crit.success_lo && y <= crit.success_hi) {
        o.success = true;
        successful.push_back(fc);
      }
    }
    if (o.passed) {
      ++passed;
      sim_total += o.similarity;
    } else {
      o.improvement = 0.0;
    }
    succeeded += o.success;
    r.seeds.push_back(o);
  }
  const double n = static_cast<double>(seeds.size());
  if (n > 0) {
    for (const auto& o : r.seeds) r.mean_improvement += o.improvement / n;
    double var = 0.0;
    for (const auto& o : r.seeds) var += (o.improvement - r.mean_improvement) * (o.improvement - r.mean_improvement);
    r.std_improvement = std::sqrt(var / n);
    r.pass_rate = passed / n;
    r.success_rate = succeeded / n;
  }
  if (passed) r.mean_similarity = sim_total / passed;
  if (successful.size() >= 2) {
    double d = 0.0;
    long pairs = 0;
    for (std::size_t a = 0; a < successful.size(); ++a)
      for (std::size_t b = a + 1; b < successful.size(); ++b, ++pairs) d += 1.0 - tanimoto(successful[a], successful[b]);
    r.diversity = d / static_cast<double>(pairs);
  }
  return r;
}

}  // namespace griddd
