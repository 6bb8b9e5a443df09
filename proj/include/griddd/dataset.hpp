#pragma once

// Dataset records, JSONL exchange format, toy generators, dataset-level
// statistics and contiguous splits.
//
// One graph per line:
//   {"atoms": ["C", "O"], "bonds": [[0, 1, "single"]], "properties": {"mw": 28.01}}
// Absent pairs are "no-bond"; listing a pair twice in either orientation is an error.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "griddd/canonical.hpp"
#include "griddd/chem_metrics.hpp"
#include "griddd/error.hpp"
#include "griddd/forward_process.hpp"
#include "griddd/graph.hpp"
#include "griddd/random.hpp"

namespace griddd {

using json = nlohmann::json;

struct DatasetRecord {
  GraphState graph;
  std::map<std::string, double> properties;
  SampleMarginals marginals;
};

inline DatasetRecord make_record(GraphState g, std::map<std::string, double> props = {}) {
  g.validate();
  if (g.has_reserved()) throw Error("dataset graphs cannot hold DEL/DEL* entries");
  DatasetRecord r{std::move(g), std::move(props), {}};
  r.marginals = compute_sample_marginals(r.graph);
  return r;
}

inline DatasetRecord record_from_json(const json& j, const CategorySpacePtr& space) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "atoms" && it.key() != "bonds" && it.key() != "properties")
      throw Error("unknown record field '" + it.key() + "'");
  GraphState g(space);
  for (const auto& a : j.at("atoms")) g.add_node(space->node_index(a.get<std::string>()));
  if (g.empty()) throw Error("record has no atoms");
  std::vector<bool> seen(static_cast<std::size_t>(g.size() * g.size()), false);
  if (j.contains("bonds"))
    for (const auto& b : j.at("bonds")) {
      if (!b.is_array() || b.size() != 3) throw Error("bond must be [i, j, label]");
      const int i = b[0].get<int>(), k = b[1].get<int>();
      if (i < 0 || k < 0 || i >= g.size() || k >= g.size()) throw Error("bond index out of range");
      if (i == k) throw Error("self bond");
      const auto idx = static_cast<std::size_t>(std::min(i, k) * g.size() + std::max(i, k));
      if (seen[idx]) throw Error("duplicate undirected bond");
      seen[idx] = true;
      g.set_edge(i, k, space->edge_index(b[2].get<std::string>()));
    }
  std::map<std::string, double> props;
  if (j.contains("properties"))
    for (auto it = j.at("properties").begin(); it != j.at("properties").end(); ++it)
      props[it.key()] = it.value().get<double>();
  return make_record(std::move(g), std::move(props));
}

inline json record_to_json(const DatasetRecord& r) {
  const GraphState& g = r.graph;
  const CategorySpace& cs = g.space();
  json atoms = json::array(), bonds = json::array();
  for (int i = 0; i < g.size(); ++i) atoms.push_back(cs.node_label(g.node(i)));
  for (int i = 0; i < g.size(); ++i)
    for (int k = i + 1; k < g.size(); ++k)
      if (g.edge(i, k) != cs.no_bond()) bonds.push_back({i, k, cs.edge_label(g.edge(i, k))});
  json props = json::object();
  for (const auto& [k, v] : r.properties) props[k] = v;
  return {{"atoms", atoms}, {"bonds", bonds}, {"properties", props}};
}

/// Graph (possibly with DEL/DEL* entries) in the record layout, for inspection output.
inline json graph_to_json(const GraphState& g) {
  const CategorySpace& cs = g.space();
  json atoms = json::array(), bonds = json::array();
  for (int i = 0; i < g.size(); ++i) atoms.push_back(cs.node_label(g.node(i)));
  for (int i = 0; i < g.size(); ++i)
    for (int k = i + 1; k < g.size(); ++k)
      if (g.edge(i, k) != cs.no_bond()) bonds.push_back({i, k, cs.edge_label(g.edge(i, k))});
  return {{"atoms", atoms}, {"bonds", bonds}};
}

inline std::vector<DatasetRecord> parse_jsonl(std::istream& in, const CategorySpacePtr& space) {
  std::vector<DatasetRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line), space));
    } catch (const json::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!out.empty()) {
    std::vector<std::string> names;
    for (const auto& [k, v] : out.front().properties) names.push_back(k);
    for (std::size_t r = 1; r < out.size(); ++r) {
      std::vector<std::string> other;
      for (const auto& [k, v] : out[r].properties) other.push_back(k);
      if (other != names) throw Error("property names differ between records");
    }
  }
  return out;
}

inline std::vector<DatasetRecord> load_jsonl(const std::string& path, const CategorySpacePtr& space) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset " + path);
  return parse_jsonl(in, space);
}

inline void write_jsonl(std::ostream& out, const std::vector<DatasetRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline void save_jsonl(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_jsonl(out, records);
}

// ---------------------------------------------------------------------------
// Toy generators

struct ToySpec {
  std::string family = "enumerable";  // "enumerable" or "chains"
  int max_nodes = 4;
  std::vector<std::string> atoms{"C", "O"};
  std::vector<std::string> bonds{"no-bond", "single"};
  std::string weighting = "uniform";  // "uniform" over classes or "labeled" (by labelled copies)
  int samples = 0;                    // 0: every class once; otherwise iid draws
};

inline constexpr long kToyEnumerationBudget = 100000;
inline constexpr int kToyFamilyLimit = 10000;

struct ToyClass {
  GraphState graph;
  double probability = 0.0;
};

/// Isomorphism classes of the family with their probabilities, ordered by
/// (size, canonical key).
inline std::vector<ToyClass> enumerate_toy_family(const ToySpec& spec) {
  const auto space = make_space(spec.atoms, spec.bonds);
  const ValenceTable table = ValenceTable::standard();
  table.check_covers(*space);
  if (spec.max_nodes < 1) throw ConfigError("toy max_nodes must be at least 1", "max_nodes");
  if (spec.weighting != "uniform" && spec.weighting != "labeled")
    throw ConfigError("unknown toy weighting '" + spec.weighting + "'", "weighting");
  const int a = space->num_node_types(), b = space->num_edge_types();
  std::map<std::pair<int, std::string>, ToyClass> found;

  auto consider = [&](const GraphState& g) {
    if (!check_validity(g, table).valid) return;
    const CanonicalForm cf = canonical_form(g);
    auto [it, inserted] = found.try_emplace({g.size(), cf.key}, ToyClass{g.reindex(cf.order), 0.0});
    it->second.probability += 1.0;
    (void)inserted;
  };

  if (spec.family == "enumerable") {
    long budget = 0;
    for (int n = 1; n <= spec.max_nodes; ++n) {
      double count = std::pow(a, n) * std::pow(b, n * (n - 1) / 2);
      budget += static_cast<long>(std::min(count, 1e12));
      if (budget > kToyEnumerationBudget || n > kMaxCanonicalNodes)
        throw ConfigError("toy spec exceeds the enumeration budget", "max_nodes");
    }
    for (int n = 1; n <= spec.max_nodes; ++n) {
      const int pairs = n * (n - 1) / 2;
      long label_codes = 1, edge_codes = 1;
      for (int k = 0; k < n; ++k) label_codes *= a;
      for (int k = 0; k < pairs; ++k) edge_codes *= b;
      for (long lc = 0; lc < label_codes; ++lc)
        for (long ec = 0; ec < edge_codes; ++ec) {
          GraphState g(space);
          long x = lc;
          for (int k = 0; k < n; ++k, x /= a) g.add_node(static_cast<int>(x % a));
          long y = ec;
          for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j, y /= b) g.set_edge(i, j, static_cast<int>(y % b));
          consider(g);
        }
    }
  } else if (spec.family == "chains") {
    const int single = space->edge_index("single");
    if (spec.max_nodes < 2) throw ConfigError("chains need max_nodes >= 2", "max_nodes");
    long budget = 0;
    for (int n = 2; n <= spec.max_nodes; ++n) {
      budget += static_cast<long>(std::min(std::pow(a, n), 1e12));
      if (budget > kToyEnumerationBudget || n > kMaxCanonicalNodes)
        throw ConfigError("toy spec exceeds the enumeration budget", "max_nodes");
    }
    for (int n = 2; n <= spec.max_nodes; ++n) {
      long codes = 1;
      for (int k = 0; k < n; ++k) codes *= a;
      for (long lc = 0; lc < codes; ++lc) {
        GraphState g(space);
        long x = lc;
        for (int k = 0; k < n; ++k, x /= a) g.add_node(static_cast<int>(x % a));
        for (int k = 0; k + 1 < n; ++k) g.set_edge(k, k + 1, single);
        consider(g);
      }
    }
  } else {
    throw ConfigError("unknown toy family '" + spec.family + "'", "family");
  }
  if (found.size() > static_cast<std::size_t>(kToyFamilyLimit))
    throw ConfigError("toy spec exceeds the enumeration budget", "max_nodes");

  std::vector<ToyClass> out;
  double total = 0.0;
  for (auto& [key, c] : found) {
    if (spec.weighting == "uniform") c.probability = 1.0;
    total += c.probability;
    out.push_back(std::move(c));
  }
  for (auto& c : out) c.probability /= total;
  return out;
}

inline std::vector<DatasetRecord> generate_toy_dataset(const ToySpec& spec, Rng& rng) {
  const auto classes = enumerate_toy_family(spec);
  const ValenceTable table = ValenceTable::standard();
  auto record = [&](const GraphState& g) {
    return make_record(g, {{"mw", molecular_weight(g, table)}, {"n", static_cast<double>(g.size())}});
  };
  std::vector<DatasetRecord> out;
  if (spec.samples <= 0) {
    for (const auto& c : classes) out.push_back(record(c.graph));
    return out;
  }
  std::vector<double> w;
  for (const auto& c : classes) w.push_back(c.probability);
  for (int k = 0; k < spec.samples; ++k) out.push_back(record(classes[static_cast<std::size_t>(sample_categorical(w, rng))].graph));
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct DatasetStats {
  Eigen::VectorXd node_marginal;
  Eigen::VectorXd edge_marginal;
  std::vector<double> size_distribution;  // indexed by n, entry 0 unused
  int n_max = 0;

  NoiseMarginals noise() const { return {node_marginal, edge_marginal}; }
};

inline DatasetStats compute_dataset_stats(const std::vector<DatasetRecord>& records) {
  if (records.empty()) throw Error("dataset statistics need a non-empty dataset");
  const CategorySpace& cs = records.front().graph.space();
  DatasetStats s;
  s.node_marginal = Eigen::VectorXd::Zero(cs.num_node_types());
  s.edge_marginal = Eigen::VectorXd::Zero(cs.num_edge_types());
  double nodes = 0.0, pairs = 0.0;
  for (const auto& r : records) {
    const GraphState& g = r.graph;
    s.n_max = std::max(s.n_max, g.size());
    for (int i = 0; i < g.size(); ++i) {
      s.node_marginal(g.node(i)) += 1.0;
      nodes += 1.0;
      for (int j = i + 1; j < g.size(); ++j) {
        s.edge_marginal(g.edge(i, j)) += 1.0;
        pairs += 1.0;
      }
    }
  }
  s.node_marginal /= nodes;
  if (pairs > 0.0) {
    s.edge_marginal /= pairs;
  } else {
    s.edge_marginal(cs.no_bond()) = 1.0;
  }
  s.size_distribution.assign(static_cast<std::size_t>(s.n_max + 1), 0.0);
  for (const auto& r : records) s.size_distribution[static_cast<std::size_t>(r.graph.size())] += 1.0;
  for (double& v : s.size_distribution) v /= static_cast<double>(records.size());
  return s;
}

inline json stats_to_json(const DatasetStats& s) {
  return {{"node_marginal", std::vector<double>(s.node_marginal.data(), s.node_marginal.data() + s.node_marginal.size())},
          {"edge_marginal", std::vector<double>(s.edge_marginal.data(), s.edge_marginal.data() + s.edge_marginal.size())},
          {"size_distribution", s.size_distribution},
          {"n_max", s.n_max}};
}

inline DatasetStats stats_from_json(const json& j) {
  DatasetStats s;
  s.node_marginal = to_vector(j.at("node_marginal").get<std::vector<double>>());
  s.edge_marginal = to_vector(j.at("edge_marginal").get<std::vector<double>>());
  s.size_distribution = j.at("size_distribution").get<std::vector<double>>();
  s.n_max = j.at("n_max").get<int>();
  return s;
}

/// FNV-1a over the JSONL serialization; identifies dataset content.
inline std::string dataset_hash(const std::vector<DatasetRecord>& records) {
  std::ostringstream os;
  write_jsonl(os, records);
  std::ostringstream hex;
  hex << std::hex << fnv1a(os.str());
  return hex.str();
}

/// Reads the cached statistics when the cache names the same content hash,
/// otherwise computes them and rewrites the cache.
inline DatasetStats cached_dataset_stats(const std::vector<DatasetRecord>& records, const std::string& cache_path) {
  const std::string hash = dataset_hash(records);
  {
    std::ifstream in(cache_path);
    if (in) {
      try {
        const json j = json::parse(in);
        if (j.value("hash", "") == hash) return stats_from_json(j.at("stats"));
      } catch (const json::exception&) {
      }
    }
  }
  const DatasetStats s = compute_dataset_stats(records);
  std::ofstream out(cache_path);
  if (!out) throw Error("cannot write stats cache " + cache_path);
  out << json{{"hash", hash}, {"stats", stats_to_json(s)}}.dump() << '\n';
  return s;
}

struct DatasetSplits {
  std::vector<DatasetRecord> train, val, test;
};

/// Contiguous prefix split: the first train_frac of records, then val_frac, then the rest.
inline DatasetSplits split_dataset(const std::vector<DatasetRecord>& records, double train_frac, double val_frac) {
  if (!(train_frac >= 0.0 && val_frac >= 0.0 && train_frac + val_frac <= 1.0 + 1e-12))
    throw ConfigError("split fractions must be non-negative and sum to at most 1", "split");
  const auto n = records.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n) + 1e-9));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n) + 1e-9)));
  DatasetSplits s;
  s.train.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train),
               records.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), records.end());
  return s;
}

/// Values of the named properties, in order.
inline Eigen::VectorXd property_vector(const DatasetRecord& r, const std::vector<std::string>& names) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto it = r.properties.find(names[k]);
    if (it == r.properties.end()) throw ConfigError("record lacks property '" + names[k] + "'", "guide");
    y(static_cast<Eigen::Index>(k)) = it->second;
  }
  return y;
}

}  // namespace griddd
