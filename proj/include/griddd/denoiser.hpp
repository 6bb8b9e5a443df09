#pragma once

// Prediction contract shared by the trainable network and the exact oracle.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "griddd/error.hpp"
#include "griddd/graph.hpp"
#include "griddd/random.hpp"

namespace griddd {

/// Distributions over proper categories and activation times.
/// edge_probs row i*n + j holds the slice for pair (i, j).
struct DenoiserOutput {
  Eigen::MatrixXd node_probs;
  Eigen::MatrixXd edge_probs;
  Eigen::MatrixXd time_probs;

  int size() const { return static_cast<int>(node_probs.rows()); }
  Eigen::VectorXd node(int i) const { return node_probs.row(i).transpose(); }
  Eigen::VectorXd edge(int i, int j) const { return edge_probs.row(static_cast<Eigen::Index>(i) * size() + j).transpose(); }
  Eigen::VectorXd time(int i) const { return time_probs.row(i).transpose(); }

  /// Max deviation of any row sum from 1 and max edge asymmetry.
  double max_contract_error() const {
    double err = 0.0;
    for (const Eigen::MatrixXd* m : {&node_probs, &edge_probs, &time_probs})
      for (Eigen::Index r = 0; r < m->rows(); ++r) err = std::max(err, std::abs(m->row(r).sum() - 1.0));
    const int n = size();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) err = std::max(err, (edge(i, j) - edge(j, i)).cwiseAbs().maxCoeff());
    return err;
  }
};

/// Property vector y, or the model's learned placeholder when `placeholder`.
struct GuideVector {
  Eigen::VectorXd y;
  bool placeholder = true;

  static GuideVector none() { return {}; }
  static GuideVector of(Eigen::VectorXd v) { return {std::move(v), false}; }
};

inline GuideVector apply_conditional_dropout(const GuideVector& y, double rho, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("dropout rate must lie in [0, 1]", "rho");
  const double u = uniform01(rng);
  if (u < rho) return GuideVector::none();
  return y;
}

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  /// Uses graph.timestep() as t. The graph may hold DEL* rows but no DEL rows.
  virtual DenoiserOutput predict(const GraphState& graph, const GuideVector& guide) const = 0;
  /// Distribution over the number of DEL* nodes to reinsert at graph.timestep().
  virtual Eigen::VectorXd predict_del_count(const GraphState& graph, const GuideVector& guide) const = 0;
  virtual int num_timesteps() const = 0;
};

struct LossWeights {
  double x = 1.0;
  double e = 2.0;
  double s = 1.0;
  double del = 1.0;
};

struct LossTargets {
  std::vector<int> nodes;  // proper labels per row
  std::vector<int> edges;  // n x n row-major proper labels; diagonal ignored
  std::vector<int> times;  // activation times per row
};

struct LossTerms {
  double x = 0.0;
  double e = 0.0;
  double s = 0.0;
  double del = 0.0;
  double total = 0.0;
};

/// Weighted sum of mean cross-entropies over rows, off-diagonal pairs, rows
/// and the count; the count term only enters when include_del is set.
inline LossTerms compute_loss(const DenoiserOutput& out, const LossTargets& tg, const Eigen::VectorXd& count_probs,
                              int n_del, const LossWeights& w, bool include_del) {
  const int n = out.size();
  auto ce = [](double p) { return p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity(); };
  LossTerms l;
  int pairs = 0;
  for (int i = 0; i < n; ++i) {
    l.x += ce(out.node_probs(i, tg.nodes[static_cast<std::size_t>(i)]));
    l.s += ce(out.time_probs(i, tg.times[static_cast<std::size_t>(i)]));
    for (int j = 0; j < n; ++j)
      if (i != j) {
        l.e += ce(out.edge_probs(i * n + j, tg.edges[static_cast<std::size_t>(i * n + j)]));
        ++pairs;
      }
  }
  if (n > 0) {
    l.x /= n;
    l.s /= n;
  }
  if (pairs > 0) l.e /= pairs;
  if (include_del) l.del = ce(count_probs(n_del));
  l.total = w.x * l.x + w.e * l.e + w.s * l.s + (include_del ? w.del * l.del : 0.0);
  return l;
}

}  // namespace griddd
