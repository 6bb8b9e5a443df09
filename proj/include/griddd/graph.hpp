#pragma once

// Graph representation for insert/delete diffusion: categorical nodes and
// edges with two reserved deletion categories (DEL, DEL*) appended after the
// proper types, per-node activation times and per-graph marginals.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "griddd/error.hpp"

namespace griddd {

inline constexpr std::string_view kNoBond = "no-bond";

enum class DeletionMark { del, del_star };

/// Ordered node and edge labels. Proper categories occupy [0, a) for nodes and
/// [0, b) for edges; DEL and DEL* follow at a, a+1 (resp. b, b+1).
class CategorySpace {
 public:
  CategorySpace(std::vector<std::string> node_types, std::vector<std::string> edge_types)
      : node_types_(std::move(node_types)), edge_types_(std::move(edge_types)) {
    if (node_types_.empty()) throw Error("category space needs at least one node type");
    if (edge_types_.size() < 2) throw Error("category space needs at least two edge types");
    auto it = std::find(edge_types_.begin(), edge_types_.end(), kNoBond);
    if (it == edge_types_.end()) throw Error("edge types must include \"no-bond\"");
    no_bond_ = static_cast<int>(it - edge_types_.begin());
    check_unique(node_types_, "node");
    check_unique(edge_types_, "edge");
  }

  int num_node_types() const { return static_cast<int>(node_types_.size()); }
  int num_edge_types() const { return static_cast<int>(edge_types_.size()); }
  int node_dim() const { return num_node_types() + 2; }
  int edge_dim() const { return num_edge_types() + 2; }

  int node_del() const { return num_node_types(); }
  int node_del_star() const { return num_node_types() + 1; }
  int edge_del() const { return num_edge_types(); }
  int edge_del_star() const { return num_edge_types() + 1; }
  int no_bond() const { return no_bond_; }

  int node_mark(DeletionMark m) const { return m == DeletionMark::del ? node_del() : node_del_star(); }
  int edge_mark(DeletionMark m) const { return m == DeletionMark::del ? edge_del() : edge_del_star(); }

  bool is_proper_node(int c) const { return c >= 0 && c < num_node_types(); }
  bool is_proper_edge(int c) const { return c >= 0 && c < num_edge_types(); }

  const std::vector<std::string>& node_types() const { return node_types_; }
  const std::vector<std::string>& edge_types() const { return edge_types_; }

  int node_index(std::string_view label) const { return lookup(node_types_, label, "atom"); }
  int edge_index(std::string_view label) const { return lookup(edge_types_, label, "bond"); }

  std::string node_label(int c) const {
    if (c == node_del()) return "DEL";
    if (c == node_del_star()) return "DEL*";
    return node_types_.at(static_cast<std::size_t>(c));
  }
  std::string edge_label(int c) const {
    if (c == edge_del()) return "DEL";
    if (c == edge_del_star()) return "DEL*";
    return edge_types_.at(static_cast<std::size_t>(c));
  }

  bool operator==(const CategorySpace& o) const {
    return node_types_ == o.node_types_ && edge_types_ == o.edge_types_;
  }

 private:
  static void check_unique(const std::vector<std::string>& v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i + 1; j < v.size(); ++j)
        if (v[i] == v[j]) throw Error(std::string("duplicate ") + what + " label \"" + v[i] + "\"");
  }
  static int lookup(const std::vector<std::string>& v, std::string_view label, const char* what) {
    auto it = std::find(v.begin(), v.end(), label);
    if (it == v.end()) throw Error(std::string("unknown ") + what + " label \"" + std::string(label) + "\"");
    return static_cast<int>(it - v.begin());
  }

  std::vector<std::string> node_types_;
  std::vector<std::string> edge_types_;
  int no_bond_ = 0;
};

using CategorySpacePtr = std::shared_ptr<const CategorySpace>;

inline CategorySpacePtr make_space(std::vector<std::string> nodes, std::vector<std::string> edges) {
  return std::make_shared<const CategorySpace>(std::move(nodes), std::move(edges));
}

/// A graph at diffusion step t. Categories are stored as indices, so every
/// row of X and every slice e_ij is one-hot by construction; the dense
/// one-hot tensors are materialized on demand.
class GraphState {
 public:
  GraphState() = default;
  explicit GraphState(CategorySpacePtr space, int t = 0) : space_(std::move(space)), t_(t) {
    if (!space_) throw Error("graph needs a category space");
  }

  const CategorySpacePtr& space_ptr() const { return space_; }
  const CategorySpace& space() const { return *space_; }

  int size() const { return static_cast<int>(nodes_.size()); }
  bool empty() const { return nodes_.empty(); }
  int timestep() const { return t_; }
  void set_timestep(int t) { t_ = t; }

  int node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  int edge(int i, int j) const { return edges_[index(i, j)]; }
  int activation(int i) const { return activation_[static_cast<std::size_t>(i)]; }

  const std::vector<int>& nodes() const { return nodes_; }
  const std::vector<int>& activations() const { return activation_; }

  void set_node(int i, int c) {
    if (c < 0 || c >= space_->node_dim()) throw Error("node category out of range");
    nodes_[static_cast<std::size_t>(i)] = c;
  }
  void set_activation(int i, int s) { activation_[static_cast<std::size_t>(i)] = s; }

  /// Writes both (i, j) and (j, i). Self-loops must stay "no-bond".
  void set_edge(int i, int j, int c) {
    if (c < 0 || c >= space_->edge_dim()) throw Error("edge category out of range");
    if (i == j) {
      if (c != space_->no_bond()) throw Error("self-loops must be no-bond");
      return;
    }
    edges_[index(i, j)] = c;
    edges_[index(j, i)] = c;
  }

  /// Appends a node whose edges start as "no-bond"; returns its index.
  int add_node(int category, int activation = 0) {
    const int n = size();
    std::vector<int> grown(static_cast<std::size_t>((n + 1) * (n + 1)), space_->no_bond());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) grown[static_cast<std::size_t>(i * (n + 1) + j)] = edge(i, j);
    edges_ = std::move(grown);
    nodes_.push_back(0);
    activation_.push_back(activation);
    set_node(n, category);
    return n;
  }

  /// Keeps the nodes where keep[i] is true, preserving order.
  GraphState select(const std::vector<bool>& keep) const {
    std::vector<int> idx;
    for (int i = 0; i < size(); ++i)
      if (keep[static_cast<std::size_t>(i)]) idx.push_back(i);
    return reindex(idx);
  }

  /// New graph whose node k is this graph's node order[k].
  GraphState reindex(const std::vector<int>& order) const {
    GraphState out(space_, t_);
    const int m = static_cast<int>(order.size());
    out.nodes_.resize(static_cast<std::size_t>(m));
    out.activation_.resize(static_cast<std::size_t>(m));
    out.edges_.assign(static_cast<std::size_t>(m * m), space_->no_bond());
    for (int a = 0; a < m; ++a) {
      out.nodes_[static_cast<std::size_t>(a)] = node(order[static_cast<std::size_t>(a)]);
      out.activation_[static_cast<std::size_t>(a)] = activation(order[static_cast<std::size_t>(a)]);
      for (int b = 0; b < m; ++b)
        out.edges_[static_cast<std::size_t>(a * m + b)] =
            edge(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]);
    }
    return out;
  }

  int count_nodes(int category) const {
    return static_cast<int>(std::count(nodes_.begin(), nodes_.end(), category));
  }

  /// n x (a+2) one-hot node matrix.
  Eigen::MatrixXd node_one_hot() const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(size(), space_->node_dim());
    for (int i = 0; i < size(); ++i) x(i, node(i)) = 1.0;
    return x;
  }

  /// (n*n) x (b+2) one-hot edge tensor, row i*n + j holds e_ij.
  Eigen::MatrixXd edge_one_hot() const {
    const int n = size();
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n * n, space_->edge_dim());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e(i * n + j, edge(i, j)) = 1.0;
    return e;
  }

  /// Throws if symmetry, diagonal, or node/edge mark consistency is violated.
  void validate() const {
    const CategorySpace& cs = *space_;
    const int n = size();
    if (edges_.size() != static_cast<std::size_t>(n * n) || activation_.size() != nodes_.size())
      throw Error("graph storage shape mismatch");
    for (int i = 0; i < n; ++i) {
      if (node(i) < 0 || node(i) >= cs.node_dim()) throw Error("node category out of range");
      if (edge(i, i) != cs.no_bond()) throw Error("diagonal edge is not no-bond");
      if (activation(i) < 0) throw Error("negative activation time");
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        if (edge(i, j) != edge(j, i)) throw Error("edge tensor is not symmetric");
        const int expected = expected_edge_mark(i, j);
        if (expected >= 0) {
          if (edge(i, j) != expected)
            throw Error("edge incident to a deleted node does not carry the matching mark");
        } else if (!cs.is_proper_edge(edge(i, j))) {
          throw Error("reserved edge category between proper nodes");
        }
      }
  }

  /// DEL dominates DEL*; -1 when both endpoints are proper.
  int expected_edge_mark(int i, int j) const {
    const CategorySpace& cs = *space_;
    if (node(i) == cs.node_del() || node(j) == cs.node_del()) return cs.edge_del();
    if (node(i) == cs.node_del_star() || node(j) == cs.node_del_star()) return cs.edge_del_star();
    return -1;
  }

  bool has_reserved() const {
    for (int i = 0; i < size(); ++i)
      if (!space_->is_proper_node(node(i))) return true;
    for (int c : edges_)
      if (!space_->is_proper_edge(c)) return true;
    return false;
  }

  bool operator==(const GraphState& o) const {
    return *space_ == *o.space_ && t_ == o.t_ && nodes_ == o.nodes_ && edges_ == o.edges_ &&
           activation_ == o.activation_;
  }

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i * size() + j); }

  CategorySpacePtr space_;
  std::vector<int> nodes_;
  std::vector<int> edges_;
  std::vector<int> activation_;
  int t_ = 0;
};

/// Per-graph categorical marginals over proper types.
struct SampleMarginals {
  std::vector<double> node;
  std::vector<double> edge;
};

inline SampleMarginals compute_sample_marginals(const GraphState& g) {
  const CategorySpace& cs = g.space();
  if (g.empty()) throw Error("empty graph has no marginals");
  if (g.has_reserved()) throw Error("marginals require a graph without DEL/DEL* entries");
  SampleMarginals m;
  m.node.assign(static_cast<std::size_t>(cs.num_node_types()), 0.0);
  m.edge.assign(static_cast<std::size_t>(cs.num_edge_types()), 0.0);
  const int n = g.size();
  for (int i = 0; i < n; ++i) m.node[static_cast<std::size_t>(g.node(i))] += 1.0;
  for (double& v : m.node) v /= n;
  if (n == 1) {
    // No unordered pairs: the only consistent edge marginal is "no-bond".
    m.edge[static_cast<std::size_t>(cs.no_bond())] = 1.0;
    return m;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m.edge[static_cast<std::size_t>(g.edge(i, j))] += 1.0;
  const double pairs = n * (n - 1) / 2.0;
  for (double& v : m.edge) v /= pairs;
  return m;
}

/// Marks node i (and every incident edge) as DEL* or DEL. Allowed moves are
/// proper -> DEL* and DEL* -> DEL.
inline GraphState apply_node_deletion_mark(const GraphState& g, int i, DeletionMark mark) {
  const CategorySpace& cs = g.space();
  if (i < 0 || i >= g.size()) throw Error("node index out of range");
  const int cur = g.node(i);
  if (mark == DeletionMark::del_star) {
    if (cur == cs.node_del()) throw Error("cannot mark a DEL node as DEL*: DEL is absorbing");
    if (cur == cs.node_del_star()) throw Error("node is already DEL*");
  } else {
    if (cur != cs.node_del_star()) throw Error("only a DEL* node can move to DEL");
  }
  GraphState out = g;
  out.set_node(i, cs.node_mark(mark));
  for (int j = 0; j < out.size(); ++j) {
    if (j == i) continue;
    out.set_edge(i, j, out.expected_edge_mark(i, j));
  }
  return out;
}

inline GraphState strip_marked_nodes(const GraphState& g, DeletionMark mark) {
  const int target = g.space().node_mark(mark);
  std::vector<bool> keep(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) keep[static_cast<std::size_t>(i)] = g.node(i) != target;
  return g.select(keep);
}

/// Builds a clean (t = 0) graph from proper categories and an undirected bond list.
inline GraphState make_graph(CategorySpacePtr space, const std::vector<int>& nodes,
                             const std::vector<std::tuple<int, int, int>>& bonds = {}) {
  GraphState g(std::move(space));
  for (int c : nodes) g.add_node(c, 0);
  for (const auto& [i, j, c] : bonds) g.set_edge(i, j, c);
  return g;
}

}  // namespace griddd
