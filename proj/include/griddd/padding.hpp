#pragma once

// Padding baseline: every graph is padded to a fixed size with a PAD atom
// type and diffused without insertions or deletions; PAD rows are dropped
// after sampling. Includes the ablation report columns.

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "griddd/chem_metrics.hpp"
#include "griddd/dataset.hpp"
#include "griddd/graph.hpp"

namespace griddd {

inline const std::string kPadLabel = "PAD";

inline CategorySpacePtr padded_space(const CategorySpace& cs) {
  std::vector<std::string> nodes = cs.node_types();
  for (const auto& a : nodes)
    if (a == kPadLabel) throw ConfigError("atom label PAD is reserved by the padding baseline", "atoms");
  nodes.push_back(kPadLabel);
  return make_space(nodes, cs.edge_types());
}

inline GraphState pad_graph(const GraphState& g, int n, const CategorySpacePtr& padded) {
  if (g.has_reserved()) throw Error("padding needs a clean graph");
  if (g.size() > n) throw ConfigError("graph larger than the padded size", "n_max");
  GraphState out(padded);
  for (int i = 0; i < g.size(); ++i) out.add_node(padded->node_index(g.space().node_label(g.node(i))));
  const int pad = padded->node_index(kPadLabel);
  while (out.size() < n) out.add_node(pad);
  for (int i = 0; i < g.size(); ++i)
    for (int j = i + 1; j < g.size(); ++j) out.set_edge(i, j, padded->edge_index(g.space().edge_label(g.edge(i, j))));
  return out;
}

/// Drops PAD rows and every edge touching them.
inline GraphState unpad_graph(const GraphState& g, const CategorySpacePtr& original) {
  const int pad = g.space().node_index(kPadLabel);
  std::vector<int> keep;
  for (int i = 0; i < g.size(); ++i)
    if (g.node(i) != pad) keep.push_back(i);
  GraphState out(original);
  for (int i : keep) out.add_node(original->node_index(g.space().node_label(g.node(i))));
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t b = a + 1; b < keep.size(); ++b)
      out.set_edge(static_cast<int>(a), static_cast<int>(b),
                   original->edge_index(g.space().edge_label(g.edge(keep[a], keep[b]))));
  return out;
}

inline std::vector<DatasetRecord> pad_records(const std::vector<DatasetRecord>& records, int n,
                                              const CategorySpacePtr& padded) {
  std::vector<DatasetRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(make_record(pad_graph(r.graph, n, padded), r.properties));
  return out;
}

struct AblationRow {
  std::string model;
  double validity = 0.0;  // valence only; connectivity is in the component columns
  double avg_nc = 0.0;
  int max_nc = 0;
  int nsc = 0;
  int samples = 0;
  double xce = 0.0;
  double ece = 0.0;
};

inline AblationRow ablation_row(std::string model, const std::vector<GraphState>& graphs, const ValenceTable& table,
                                double xce, double ece) {
  AblationRow r;
  r.model = std::move(model);
  const ComponentStats cs = component_stats(graphs);
  int valid = 0;
  for (const auto& g : graphs) valid += check_validity(g, table, false).valid;
  r.samples = static_cast<int>(graphs.size());
  r.validity = r.samples ? static_cast<double>(valid) / r.samples : 0.0;
  r.avg_nc = cs.avg_nc;
  r.max_nc = cs.max_nc;
  r.nsc = cs.nsc;
  r.xce = xce;
  r.ece = ece;
  return r;
}

inline json ablation_to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"model", r.model},
                   {"Val", r.validity},
                   {"Avg NC", r.avg_nc},
                   {"Max NC", r.max_nc},
                   {"NSC", r.nsc},
                   {"XCE", r.xce},
                   {"ECE", r.ece},
                   {"samples", r.samples}});
  return out;
}

inline std::string ablation_table(const std::vector<AblationRow>& rows) {
  int w = 10;
  for (const auto& r : rows) w = std::max(w, static_cast<int>(r.model.size()) + 2);
  std::ostringstream os;
  os << std::left << std::setw(w) << "model" << std::right << std::setw(8) << "Val" << std::setw(9) << "Avg NC"
     << std::setw(8) << "Max NC" << std::setw(7) << "NSC" << std::setw(9) << "XCE" << std::setw(9) << "ECE" << '\n';
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows)
    os << std::left << std::setw(w) << r.model << std::right << std::setw(8) << r.validity << std::setw(9) << r.avg_nc
       << std::setw(8) << r.max_nc << std::setw(7) << r.nsc << std::setw(9) << r.xce << std::setw(9) << r.ece << '\n';
  return os.str();
}

}  // namespace griddd
