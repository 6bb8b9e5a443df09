#pragma once

// Exact Bayes denoiser for a finite data distribution. The observed noisy
// graph is treated as a uniformly permuted draw of the forward process, and
// every quantity the sampler needs is a posterior marginal under that model:
// sums over data classes, target sizes, alignments of observed rows to latent
// nodes, and edit times (the latter by a subset recursion over timesteps).

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "griddd/canonical.hpp"
#include "griddd/denoiser.hpp"
#include "griddd/forward_process.hpp"
#include "griddd/graph.hpp"
#include "griddd/schedules.hpp"

namespace griddd {

struct WeightedGraph {
  GraphState graph;
  double probability = 0.0;
};

class OracleDenoiser : public Denoiser {
 public:
  OracleDenoiser(std::vector<WeightedGraph> data, ScheduleSet sched, SizeParams size, NoiseMarginals noise)
      : sched_(std::move(sched)), size_(size), noise_(std::move(noise)) {
    if (data.empty()) throw Error("oracle needs at least one data graph");
    double total = 0.0;
    for (auto& d : data) {
      if (d.graph.empty() || d.graph.has_reserved()) throw Error("oracle data graphs must be clean and non-empty");
      if (d.graph.size() > size_.n_max) throw ConfigError("data graph larger than n_max", "n_max");
      if (!(d.probability >= 0.0)) throw Error("negative class probability");
      total += d.probability;
    }
    if (!(total > 0.0)) throw Error("class probabilities sum to zero");
    space_ = data.front().graph.space_ptr();
    for (auto& d : data) {
      if (!(d.graph.space() == *space_)) throw CompatibilityError("oracle data graphs use different spaces");
      Class c;
      c.graph = d.graph;
      c.probability = d.probability / total;
      const SampleMarginals m = compute_sample_marginals(d.graph);
      c.node_marginal = to_vector(m.node);
      c.edge_marginal = to_vector(m.edge);
      c.h = target_size_distribution(d.graph.size(), size_);
      classes_.push_back(std::move(c));
    }
    if (noise_.node.size() != space_->num_node_types() || noise_.edge.size() != space_->num_edge_types())
      throw CompatibilityError("noise marginals do not match the category space");
  }

  int num_timesteps() const override { return sched_.T(); }
  int max_count() const { return size_.n_max; }
  const ScheduleSet& schedule() const { return sched_; }
  long zero_evidence_queries() const { return zero_evidence_.load(); }

  DenoiserOutput predict(const GraphState& graph, const GuideVector&) const override {
    check(graph);
    const CanonicalForm cf = canonical_form(graph);
    const std::string key = std::to_string(graph.timestep()) + "|" + cf.key;
    DenoiserOutput canon;
    {
      std::lock_guard<std::mutex> lock(mu_);
      const auto it = predict_cache_.find(key);
      if (it != predict_cache_.end()) canon = it->second;
    }
    if (canon.node_probs.size() == 0 && graph.size() > 0) {
      canon = compute_predict(graph.reindex(cf.order));
      std::lock_guard<std::mutex> lock(mu_);
      predict_cache_.emplace(key, canon);
    }
    return uncanonicalize(canon, cf.order);
  }

  Eigen::VectorXd predict_del_count(const GraphState& graph, const GuideVector&) const override {
    check(graph);
    if (graph.count_nodes(space_->node_del_star()) > 0) throw Error("count input must not hold DEL* rows");
    const CanonicalForm cf = canonical_form(graph);
    const std::string key = std::to_string(graph.timestep()) + "|" + cf.key;
    {
      std::lock_guard<std::mutex> lock(mu_);
      const auto it = count_cache_.find(key);
      if (it != count_cache_.end()) return it->second;
    }
    Eigen::VectorXd out = compute_count(graph.reindex(cf.order));
    std::lock_guard<std::mutex> lock(mu_);
    count_cache_.emplace(key, out);
    return out;
  }

  /// Probability of the unordered observation (up to the 1/m! permutation factor).
  double evidence(const GraphState& graph) const {
    check(graph);
    return accumulate(graph).z;
  }

  /// Initial-size distribution of the reverse chain: sum_c p_c h_{n0(c)}(n), indexed by n.
  std::vector<double> terminal_size_distribution() const {
    std::vector<double> p(static_cast<std::size_t>(size_.n_max + 1), 0.0);
    for (const auto& c : classes_)
      for (int n = 1; n <= size_.n_max; ++n) p[static_cast<std::size_t>(n)] += c.probability * c.h[static_cast<std::size_t>(n)];
    return p;
  }

 private:
  struct Class {
    GraphState graph;
    double probability = 0.0;
    Eigen::VectorXd node_marginal, edge_marginal;
    std::vector<double> h;
  };

  struct Acc {
    double z = 0.0;
    Eigen::MatrixXd node, edge, time;
  };

  void check(const GraphState& g) const {
    if (!(g.space() == *space_)) throw CompatibilityError("graph space differs from the oracle's space");
    if (g.timestep() < 1 || g.timestep() > sched_.T()) throw Error("oracle needs 1 <= t <= T");
    if (g.count_nodes(space_->node_del()) > 0) throw Error("oracle input must not hold DEL rows");
    if (g.size() > size_.n_max) throw Error("observation larger than n_max");
    g.validate();
  }

  static double kernel(double ab, const Eigen::VectorXd& m, int from, int to) {
    return (from == to ? ab : 0.0) + (1.0 - ab) * m(to);
  }

  static double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  static double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
  }

  DenoiserOutput uncanonicalize(const DenoiserOutput& canon, const std::vector<int>& order) const {
    const int m = static_cast<int>(order.size());
    DenoiserOutput out;
    out.node_probs.resize(m, canon.node_probs.cols());
    out.time_probs.resize(m, canon.time_probs.cols());
    out.edge_probs.resize(m * m, canon.edge_probs.cols());
    for (int k = 0; k < m; ++k) {
      const int a = order[static_cast<std::size_t>(k)];
      out.node_probs.row(a) = canon.node_probs.row(k);
      out.time_probs.row(a) = canon.time_probs.row(k);
      for (int l = 0; l < m; ++l) out.edge_probs.row(a * m + order[static_cast<std::size_t>(l)]) = canon.edge_probs.row(k * m + l);
    }
    return out;
  }

  DenoiserOutput compute_predict(const GraphState& obs) const {
    const Acc acc = accumulate(obs);
    const int m = obs.size();
    DenoiserOutput out;
    if (!(acc.z > 0.0)) {
      ++zero_evidence_;
      out.node_probs = noise_.node.transpose().replicate(m, 1);
      out.edge_probs = noise_.edge.transpose().replicate(m * m, 1);
      out.time_probs = Eigen::MatrixXd::Zero(m, sched_.T() + 1);
      out.time_probs.col(0).setOnes();
    } else {
      out.node_probs = acc.node / acc.z;
      out.edge_probs = acc.edge / acc.z;
      out.time_probs = acc.time / acc.z;
    }
    for (int i = 0; i < m; ++i) {
      out.edge_probs.row(i * m + i).setZero();
      out.edge_probs(i * m + i, space_->no_bond()) = 1.0;
    }
    return out;
  }

  /// Likelihood of the proper rows under an alignment of rows to original nodes.
  double original_likelihood(const GraphState& obs, const Class& c, const std::vector<int>& rows,
                             const std::vector<int>& target, double ab_x, double ab_e) const {
    double l = 1.0;
    for (std::size_t a = 0; a < rows.size() && l > 0.0; ++a) {
      const int i = rows[a];
      if (obs.node(i) == space_->node_del_star()) continue;
      l *= kernel(ab_x, noise_.node, c.graph.node(target[a]), obs.node(i));
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        const int j = rows[b];
        if (obs.node(j) == space_->node_del_star()) continue;
        l *= kernel(ab_e, noise_.edge, c.graph.edge(target[a], target[b]), obs.edge(i, j));
      }
    }
    return l;
  }

  /// Plan weight of the deletion and no-edit branches for one class, given
  /// m observed rows of which d are DEL*.
  double deletion_plan_weight(const Class& c, int m, int d, int t) const {
    const int n0 = c.graph.size();
    const int present = m - d;
    const int gone = n0 - m;
    if (gone < 0) return 0.0;
    double w = 0.0;
    for (int nT = 1; nT <= n0; ++nT) {
      const int k = n0 - nT;
      const int r = k - gone - d;
      if (r < 0 || r > present) continue;
      w += c.h[static_cast<std::size_t>(nT)] * binom(present, r) / binom(n0, k) * std::pow(sched_.zeta(t), r) *
           std::pow(sched_.zeta_prime(t), d) * std::pow(1.0 - sched_.zeta(t - 1), gone);
    }
    return w;
  }

  /// Insertion branches with p inserted rows present: sum over target sizes.
  double insertion_plan_weight(const Class& c, int p, int t) const {
    const int n0 = c.graph.size();
    double w = 0.0;
    for (int nT = n0 + std::max(p, 1); nT <= size_.n_max; ++nT) {
      const int k = nT - n0;
      w += c.h[static_cast<std::size_t>(nT)] * binom(k, p) * factorial(p) * std::pow(sched_.zeta(t), k - p);
    }
    return w;
  }

  struct InsertionTimes {
    double total = 0.0;
    std::vector<Eigen::VectorXd> single;  // per inserted row: weight of u_j = u
    std::vector<std::vector<Eigen::VectorXd>> pair;  // per pair: weight of max(u_j, u_j') = v
  };

  /// Sum over edit times in [1, t]^p of prod_j zeta'(u_j) A_j(u_j) prod_{j<j'} G_jj'(max),
  /// with its single-time and pair-max marginals, by a forward-backward pass
  /// over the subset of rows already placed.
  static InsertionTimes insertion_times(const std::vector<Eigen::VectorXd>& unary,
                                        const std::vector<std::vector<Eigen::VectorXd>>& pairwise, int t) {
    const int p = static_cast<int>(unary.size());
    const int full = (1 << p) - 1;
    InsertionTimes r;
    r.single.assign(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(t + 1));
    r.pair.assign(static_cast<std::size_t>(p), std::vector<Eigen::VectorXd>(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(t + 1)));
    auto step = [&](int v, int s, int a) {
      double f = 1.0;
      for (int j = 0; j < p; ++j) {
        if (!(a >> j & 1)) continue;
        f *= unary[static_cast<std::size_t>(j)](v);
        for (int q = 0; q < p; ++q)
          if (q != j && ((s >> q & 1) || ((a >> q & 1) && q < j))) f *= pairwise[static_cast<std::size_t>(j)][static_cast<std::size_t>(q)](v);
      }
      return f;
    };
    std::vector<std::vector<double>> fwd(static_cast<std::size_t>(t + 1), std::vector<double>(static_cast<std::size_t>(full + 1), 0.0));
    std::vector<std::vector<double>> bwd = fwd;
    fwd[0][0] = 1.0;
    for (int v = 1; v <= t; ++v)
      for (int s = 0; s <= full; ++s) {
        const double fs = fwd[static_cast<std::size_t>(v - 1)][static_cast<std::size_t>(s)];
        if (fs == 0.0) continue;
        const int rest = full & ~s;
        for (int a = rest;; a = (a - 1) & rest) {
          fwd[static_cast<std::size_t>(v)][static_cast<std::size_t>(s | a)] += fs * step(v, s, a);
          if (a == 0) break;
        }
      }
    bwd[static_cast<std::size_t>(t)][static_cast<std::size_t>(full)] = 1.0;
    for (int v = t; v >= 1; --v)
      for (int s = 0; s <= full; ++s) {
        const int rest = full & ~s;
        double acc = 0.0;
        for (int a = rest;; a = (a - 1) & rest) {
          acc += step(v, s, a) * bwd[static_cast<std::size_t>(v)][static_cast<std::size_t>(s | a)];
          if (a == 0) break;
        }
        bwd[static_cast<std::size_t>(v - 1)][static_cast<std::size_t>(s)] = acc;
      }
    r.total = fwd[static_cast<std::size_t>(t)][static_cast<std::size_t>(full)];
    if (r.total == 0.0 || p == 0) return r;
    for (int v = 1; v <= t; ++v)
      for (int s = 0; s <= full; ++s) {
        const double fs = fwd[static_cast<std::size_t>(v - 1)][static_cast<std::size_t>(s)];
        if (fs == 0.0) continue;
        const int rest = full & ~s;
        for (int a = rest; a != 0; a = (a - 1) & rest) {
          const double w = fs * step(v, s, a) * bwd[static_cast<std::size_t>(v)][static_cast<std::size_t>(s | a)];
          if (w == 0.0) continue;
          for (int j = 0; j < p; ++j) {
            if (!(a >> j & 1)) continue;
            r.single[static_cast<std::size_t>(j)](v) += w;
            for (int q = 0; q < p; ++q)
              if (q != j && ((s >> q & 1) || (a >> q & 1))) {
                // Each unordered pair is counted once: by its later member, or by the smaller index when tied.
                if ((a >> q & 1) && q < j) continue;
                r.pair[static_cast<std::size_t>(j)][static_cast<std::size_t>(q)](v) += w;
                r.pair[static_cast<std::size_t>(q)][static_cast<std::size_t>(j)](v) += w;
              }
          }
        }
      }
    return r;
  }

  enum class Branches { all, insertion };

  Acc accumulate(const GraphState& obs, Branches which = Branches::all) const {
    const int m = obs.size();
    const int t = obs.timestep();
    const int a = space_->num_node_types(), b = space_->num_edge_types();
    Acc acc;
    acc.node = Eigen::MatrixXd::Zero(m, a);
    acc.edge = Eigen::MatrixXd::Zero(m * m, b);
    acc.time = Eigen::MatrixXd::Zero(m, sched_.T() + 1);
    const int d = obs.count_nodes(space_->node_del_star());
    const double ab_x = sched_.alpha_bar_ratio(Channel::nodes, 0, t);
    const double ab_e = sched_.alpha_bar_ratio(Channel::edges, 0, t);
    std::vector<int> all_rows(static_cast<std::size_t>(m));
    std::iota(all_rows.begin(), all_rows.end(), 0);

    for (const Class& c : classes_) {
      if (c.probability == 0.0) continue;
      const int n0 = c.graph.size();

      // Deletion and no-edit branches: rows inject into the original nodes.
      const double wdel =
          which == Branches::all && m <= n0 ? c.probability * deletion_plan_weight(c, m, d, t) : 0.0;
      if (wdel > 0.0) {
        for_each_injection(m, n0, [&](const std::vector<int>& target) {
          const double w = wdel * original_likelihood(obs, c, all_rows, target, ab_x, ab_e);
          if (w == 0.0) return;
          acc.z += w;
          for (int i = 0; i < m; ++i) {
            acc.node(i, c.graph.node(target[static_cast<std::size_t>(i)])) += w;
            acc.time(i, 0) += w;
            for (int j = 0; j < m; ++j)
              if (j != i)
                acc.edge(i * m + j, c.graph.edge(target[static_cast<std::size_t>(i)], target[static_cast<std::size_t>(j)])) += w;
          }
        });
      }

      // Insertion branches: n0 rows are originals, the other p rows inserted.
      const int p = m - n0;
      if (d > 0 || p < 0) continue;
      const double wins = c.probability * insertion_plan_weight(c, p, t);
      if (wins == 0.0) continue;
      for_each_subset(m, p, [&](const std::vector<int>& ins, const std::vector<int>& orig) {
        double sigma_total = 0.0;
        Eigen::MatrixXd orig_node = Eigen::MatrixXd::Zero(n0, a);
        Eigen::MatrixXd orig_edge = Eigen::MatrixXd::Zero(n0 * n0, b);
        for_each_injection(n0, n0, [&](const std::vector<int>& target) {
          const double l = original_likelihood(obs, c, orig, target, ab_x, ab_e);
          if (l == 0.0) return;
          sigma_total += l;
          for (int x = 0; x < n0; ++x) {
            orig_node(x, c.graph.node(target[static_cast<std::size_t>(x)])) += l;
            for (int y = 0; y < n0; ++y)
              if (y != x)
                orig_edge(x * n0 + y, c.graph.edge(target[static_cast<std::size_t>(x)], target[static_cast<std::size_t>(y)])) += l;
          }
        });
        if (sigma_total == 0.0) return;

        std::vector<Eigen::VectorXd> unary(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(t + 1));
        std::vector<std::vector<Eigen::VectorXd>> pairwise(
            static_cast<std::size_t>(p), std::vector<Eigen::VectorXd>(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(t + 1)));
        for (int j = 0; j < p; ++j) {
          const int row = ins[static_cast<std::size_t>(j)];
          for (int u = 1; u <= t; ++u) {
            const double ax = sched_.alpha_bar_ratio(Channel::nodes, u, t);
            const double ae = sched_.alpha_bar_ratio(Channel::edges, u, t);
            double f = sched_.zeta_prime(u) * label_evidence(c.node_marginal, noise_.node, ax, obs.node(row));
            for (int o : orig) f *= label_evidence(c.edge_marginal, noise_.edge, ae, obs.edge(row, o));
            unary[static_cast<std::size_t>(j)](u) = f;
            for (int q = 0; q < p; ++q)
              if (q != j)
                pairwise[static_cast<std::size_t>(j)][static_cast<std::size_t>(q)](u) =
                    label_evidence(c.edge_marginal, noise_.edge, ae, obs.edge(row, ins[static_cast<std::size_t>(q)]));
          }
        }
        const InsertionTimes it = insertion_times(unary, pairwise, t);
        const double w = wins * sigma_total * it.total;
        if (w == 0.0) return;
        acc.z += w;
        const double scale = wins * it.total;
        for (int x = 0; x < n0; ++x) {
          const int i = orig[static_cast<std::size_t>(x)];
          acc.node.row(i) += scale * orig_node.row(x);
          acc.time(i, 0) += w;
          for (int y = 0; y < n0; ++y)
            if (y != x) acc.edge.row(i * m + orig[static_cast<std::size_t>(y)]) += scale * orig_edge.row(x * n0 + y);
        }
        const double per_time = wins * sigma_total;
        for (int j = 0; j < p; ++j) {
          const int row = ins[static_cast<std::size_t>(j)];
          const Eigen::VectorXd& su = it.single[static_cast<std::size_t>(j)];
          for (int u = 1; u <= t; ++u) {
            if (su(u) == 0.0) continue;
            const double wu = per_time * su(u);
            acc.time(row, u) += wu;
            const double ax = sched_.alpha_bar_ratio(Channel::nodes, u, t);
            const double ae = sched_.alpha_bar_ratio(Channel::edges, u, t);
            acc.node.row(row) += wu * label_posterior(c.node_marginal, noise_.node, ax, obs.node(row)).transpose();
            for (int o : orig) {
              const Eigen::VectorXd pe = label_posterior(c.edge_marginal, noise_.edge, ae, obs.edge(row, o));
              acc.edge.row(row * m + o) += wu * pe.transpose();
              acc.edge.row(o * m + row) += wu * pe.transpose();
            }
          }
          for (int q = 0; q < p; ++q) {
            if (q == j) continue;
            const int other = ins[static_cast<std::size_t>(q)];
            const Eigen::VectorXd& sv = it.pair[static_cast<std::size_t>(j)][static_cast<std::size_t>(q)];
            for (int v = 1; v <= t; ++v) {
              if (sv(v) == 0.0) continue;
              const double ae = sched_.alpha_bar_ratio(Channel::edges, v, t);
              acc.edge.row(row * m + other) +=
                  per_time * sv(v) * label_posterior(c.edge_marginal, noise_.edge, ae, obs.edge(row, other)).transpose();
            }
          }
        }
      });
    }
    return acc;
  }

  Eigen::VectorXd compute_count(const GraphState& obs) const {
    const int m = obs.size();
    const int t = obs.timestep();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(size_.n_max + 1);
    const double ab_x = sched_.alpha_bar_ratio(Channel::nodes, 0, t);
    const double ab_e = sched_.alpha_bar_ratio(Channel::edges, 0, t);
    std::vector<int> all_rows(static_cast<std::size_t>(m));
    std::iota(all_rows.begin(), all_rows.end(), 0);
    for (const Class& c : classes_) {
      if (c.probability == 0.0) continue;
      const int n0 = c.graph.size();
      if (m > n0) continue;
      double lsum = 0.0;
      for_each_injection(m, n0, [&](const std::vector<int>& target) {
        lsum += original_likelihood(obs, c, all_rows, target, ab_x, ab_e);
      });
      if (lsum == 0.0) continue;
      const int gone = n0 - m;
      for (int nT = 1; nT <= n0; ++nT) {
        const int k = n0 - nT;
        const int r = k - gone;
        if (r < 0 || r > m) continue;
        const double base = c.probability * c.h[static_cast<std::size_t>(nT)] * binom(m, r) / binom(n0, k) *
                            std::pow(sched_.zeta(t), r) * lsum;
        for (int d = 0; d <= gone; ++d)
          out(d) += base * binom(gone, d) * std::pow(sched_.zeta_prime(t), d) *
                    std::pow(1.0 - sched_.zeta(t - 1), gone - d);
      }
    }
    // Insertion branches never hold DEL* nodes.
    out(0) += accumulate(obs, Branches::insertion).z;
    const double total = out.sum();
    if (!(total > 0.0)) {
      ++zero_evidence_;
      out.setZero();
      out(0) = 1.0;
      return out;
    }
    return out / total;
  }

  /// Posterior-weighted evidence sum_l m(l) K(l -> obs).
  static double label_evidence(const Eigen::VectorXd& start, const Eigen::VectorXd& noise, double ab, int obs) {
    return ab * start(obs) + (1.0 - ab) * noise(obs);
  }

  static Eigen::VectorXd label_posterior(const Eigen::VectorXd& start, const Eigen::VectorXd& noise, double ab, int obs) {
    Eigen::VectorXd p(start.size());
    for (Eigen::Index l = 0; l < start.size(); ++l) p(l) = start(l) * kernel(ab, noise, static_cast<int>(l), obs);
    const double s = p.sum();
    return s > 0.0 ? Eigen::VectorXd(p / s) : start;
  }

  /// Every injective map rows [0, m) -> nodes [0, n).
  template <class F>
  static void for_each_injection(int m, int n, F&& f) {
    std::vector<int> target(static_cast<std::size_t>(m));
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    auto rec = [&](auto&& self, int i) -> void {
      if (i == m) {
        f(static_cast<const std::vector<int>&>(target));
        return;
      }
      for (int x = 0; x < n; ++x) {
        if (used[static_cast<std::size_t>(x)]) continue;
        used[static_cast<std::size_t>(x)] = true;
        target[static_cast<std::size_t>(i)] = x;
        self(self, i + 1);
        used[static_cast<std::size_t>(x)] = false;
      }
    };
    rec(rec, 0);
  }

  /// Every subset of size p of [0, m), with its complement (both ascending).
  template <class F>
  static void for_each_subset(int m, int p, F&& f) {
    for (int mask = 0; mask < (1 << m); ++mask) {
      if (std::popcount(static_cast<unsigned>(mask)) != p) continue;
      std::vector<int> in, out;
      for (int i = 0; i < m; ++i) (mask >> i & 1 ? in : out).push_back(i);
      f(in, out);
    }
  }

  CategorySpacePtr space_;
  std::vector<Class> classes_;
  ScheduleSet sched_;
  SizeParams size_;
  NoiseMarginals noise_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, DenoiserOutput> predict_cache_;
  mutable std::unordered_map<std::string, Eigen::VectorXd> count_cache_;
  mutable std::atomic<long> zero_evidence_{0};
};

}  // namespace griddd
