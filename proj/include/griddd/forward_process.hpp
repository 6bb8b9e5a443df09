#pragma once

// Forward corruption G^0 -> G^{*t} under a size-change plan (delete, insert or
// keep), following the training-time corruption procedure: untouched elements
// follow the base cumulative kernel, deletion targets switch to DEL* exactly at
// their edit time and to DEL afterwards, inserted nodes appear at their edit
// time with a label drawn from the sample's own marginals.

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "griddd/graph.hpp"
#include "griddd/random.hpp"
#include "griddd/schedules.hpp"
#include "griddd/transitions.hpp"

namespace griddd {

/// Dataset-level marginals that drive the base noise.
struct NoiseMarginals {
  Eigen::VectorXd node;
  Eigen::VectorXd edge;
};

struct InsertionSpec {
  int time = 0;
  int label = 0;
};

struct ForwardPlan {
  int n0 = 0;
  int nT = 0;
  int delta = 0;
  std::vector<int> edit_times;        // sorted, |delta| entries
  std::vector<int> deletion_targets;  // aligned with edit_times when delta < 0
  std::vector<InsertionSpec> insertions;  // aligned with edit_times when delta > 0
  // Initial labels of every pair touching an inserted node, over the
  // (n0 + k) x (n0 + k) node set; -1 for original pairs.
  std::vector<int> insertion_edge_labels;

  int total_nodes() const { return n0 + static_cast<int>(insertions.size()); }
  int initial_edge(int i, int j) const {
    return insertion_edge_labels[static_cast<std::size_t>(i * total_nodes() + j)];
  }
};

/// Plan with an explicit target size; the remaining choices are random.
inline ForwardPlan make_forward_plan_for_size(const GraphState& g, int nT, const ScheduleSet& sched,
                                              const SampleMarginals& sample, Rng& rng) {
  if (g.has_reserved()) throw Error("forward plan needs a clean data graph");
  ForwardPlan p;
  p.n0 = g.size();
  p.nT = nT;
  p.delta = nT - p.n0;
  const int k = std::abs(p.delta);
  p.edit_times = sample_edit_timesteps(k, sched, rng);
  std::sort(p.edit_times.begin(), p.edit_times.end());
  if (p.delta < 0) {
    std::vector<int> pool(static_cast<std::size_t>(p.n0));
    std::iota(pool.begin(), pool.end(), 0);
    for (int j = 0; j < k; ++j) {
      std::uniform_int_distribution<int> pick(j, p.n0 - 1);
      std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick(rng))]);
      p.deletion_targets.push_back(pool[static_cast<std::size_t>(j)]);
    }
  } else if (p.delta > 0) {
    for (int j = 0; j < k; ++j)
      p.insertions.push_back({p.edit_times[static_cast<std::size_t>(j)], sample_categorical(sample.node, rng)});
  }
  const int total = p.total_nodes();
  p.insertion_edge_labels.assign(static_cast<std::size_t>(total * total), -1);
  for (int i = p.n0; i < total; ++i)
    for (int j = 0; j < i; ++j) {
      const int e = sample_categorical(sample.edge, rng);
      p.insertion_edge_labels[static_cast<std::size_t>(i * total + j)] = e;
      p.insertion_edge_labels[static_cast<std::size_t>(j * total + i)] = e;
    }
  return p;
}

inline ForwardPlan make_forward_plan(const GraphState& g, const ScheduleSet& sched, const SizeParams& size,
                                     const SampleMarginals& sample, Rng& rng) {
  const int nT = sample_target_size(g.size(), size, rng);
  return make_forward_plan_for_size(g, nT, sched, sample, rng);
}

/// Plan that keeps the size fixed (plain discrete diffusion).
inline ForwardPlan make_identity_plan(const GraphState& g) {
  ForwardPlan p;
  p.n0 = p.nT = g.size();
  p.insertion_edge_labels.assign(static_cast<std::size_t>(p.n0 * p.n0), -1);
  return p;
}

/// Corrupted graph plus the supervision targets of each present row: the
/// category at activation time (original label or inserted label).
struct CorruptedSample {
  GraphState state;
  std::vector<int> node_targets;
  std::vector<int> edge_targets;  // n x n, row-major; diagonal holds no-bond

  int edge_target(int i, int j) const { return edge_targets[static_cast<std::size_t>(i * state.size() + j)]; }
};

inline CorruptedSample corrupt_with_targets(const GraphState& g, const ForwardPlan& plan, int t,
                                            const ScheduleSet& sched, const NoiseMarginals& noise, Rng& rng) {
  if (t < 1 || t > sched.T()) throw Error("corrupt needs 1 <= t <= T");
  if (plan.n0 != g.size()) throw Error("plan does not match graph size");
  const CategorySpace& cs = g.space();

  // Per latent node: -1 absent, otherwise its activation time; mark = DEL/DEL*/none.
  const int total = plan.total_nodes();
  std::vector<int> present_time(static_cast<std::size_t>(total), 0);
  std::vector<int> mark(static_cast<std::size_t>(total), -1);
  std::vector<int> init_label(static_cast<std::size_t>(total), 0);
  for (int i = 0; i < plan.n0; ++i) init_label[static_cast<std::size_t>(i)] = g.node(i);
  for (std::size_t j = 0; j < plan.deletion_targets.size(); ++j) {
    const int u = plan.edit_times[j];
    const int i = plan.deletion_targets[j];
    if (t == u) mark[static_cast<std::size_t>(i)] = cs.node_del_star();
    if (t > u) mark[static_cast<std::size_t>(i)] = cs.node_del();
  }
  for (std::size_t j = 0; j < plan.insertions.size(); ++j) {
    const auto idx = static_cast<std::size_t>(plan.n0) + j;
    const InsertionSpec& ins = plan.insertions[j];
    present_time[idx] = ins.time <= t ? ins.time : -1;
    init_label[idx] = ins.label;
  }

  std::vector<int> order;
  for (int i = 0; i < total; ++i)
    if (present_time[static_cast<std::size_t>(i)] >= 0) order.push_back(i);

  CorruptedSample out{GraphState(g.space_ptr(), t), {}, {}};
  for (int i : order) {
    const auto ui = static_cast<std::size_t>(i);
    int c = mark[ui];
    if (c < 0) {
      const double ab = sched.alpha_bar_ratio(Channel::nodes, present_time[ui], t);
      const Eigen::RowVectorXd row = base_kernel_row(ab, noise.node, init_label[ui]);
      c = sample_categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), rng);
    }
    out.state.add_node(c, present_time[ui]);
    out.node_targets.push_back(init_label[ui]);
  }

  const int m = static_cast<int>(order.size());
  out.edge_targets.assign(static_cast<std::size_t>(m * m), cs.no_bond());
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      const int i = order[static_cast<std::size_t>(a)], j = order[static_cast<std::size_t>(b)];
      const int e0 = (i < plan.n0 && j < plan.n0) ? g.edge(i, j) : plan.initial_edge(i, j);
      out.edge_targets[static_cast<std::size_t>(a * m + b)] = e0;
      out.edge_targets[static_cast<std::size_t>(b * m + a)] = e0;
      int e = out.state.expected_edge_mark(a, b);
      if (e < 0) {
        const int act = std::max(out.state.activation(a), out.state.activation(b));
        const double ab = sched.alpha_bar_ratio(Channel::edges, act, t);
        const Eigen::RowVectorXd row = base_kernel_row(ab, noise.edge, e0);
        e = sample_categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), rng);
      }
      out.state.set_edge(a, b, e);
    }
  return out;
}

inline GraphState corrupt(const GraphState& g, const ForwardPlan& plan, int t, const ScheduleSet& sched,
                          const NoiseMarginals& noise, Rng& rng) {
  return corrupt_with_targets(g, plan, t, sched, noise, rng).state;
}

}  // namespace griddd
