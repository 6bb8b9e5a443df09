#include "griddd/oracle_denoiser.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "griddd/dataset.hpp"

namespace griddd {
namespace {

using Dists = std::vector<std::vector<double>>;

// Calls f(choice, probability) for every outcome with non-zero probability.
void for_each_outcome(const Dists& dists, const std::function<void(const std::vector<int>&, double)>& f) {
  std::vector<int> choice(dists.size());
  std::function<void(std::size_t, double)> rec = [&](std::size_t k, double p) {
    if (k == dists.size()) {
      f(choice, p);
      return;
    }
    for (std::size_t c = 0; c < dists[k].size(); ++c) {
      if (dists[k][c] == 0.0) continue;
      choice[k] = static_cast<int>(c);
      rec(k + 1, p * dists[k][c]);
    }
  };
  rec(0, 1.0);
}

std::vector<double> kernel_row(double ab, const Eigen::VectorXd& m, int from) {
  std::vector<double> r(static_cast<std::size_t>(m.size()));
  for (Eigen::Index x = 0; x < m.size(); ++x) r[static_cast<std::size_t>(x)] = (x == from ? ab : 0.0) + (1.0 - ab) * m(x);
  return r;
}

struct Joint {
  GraphState obs;
  double z = 0.0;
  Eigen::MatrixXd node, edge, time;
};

struct Enumeration {
  std::map<std::string, Joint> predict;
  std::map<std::string, std::pair<GraphState, Eigen::VectorXd>> count;
};

std::string exact_key(const GraphState& g) {
  std::vector<int> id(static_cast<std::size_t>(g.size()));
  std::iota(id.begin(), id.end(), 0);
  return encode_ordered(g, id);
}

// Literal forward process at step t: every class, target size, edit-time
// tuple, deletion sequence, inserted label and edge, noise outcome, and
// uniformly random row order of the observation.
Enumeration enumerate_forward(const std::vector<WeightedGraph>& data, const ScheduleSet& sched, const SizeParams& sp,
                              const NoiseMarginals& noise, int t) {
  Enumeration en;
  const CategorySpace& cs = data.front().graph.space();
  const int a = cs.num_node_types(), b = cs.num_edge_types();
  const int T = sched.T();
  for (const auto& wg : data) {
    const GraphState& g = wg.graph;
    const int n0 = g.size();
    const SampleMarginals sm = compute_sample_marginals(g);
    const auto h = target_size_distribution(n0, sp);
    for (int nT = 1; nT <= sp.n_max; ++nT) {
      const int k = std::abs(nT - n0);
      Dists times(static_cast<std::size_t>(k), sched.zeta_prime_table());
      for_each_outcome(times, [&](const std::vector<int>& raw_u, double pu) {
        std::vector<int> u = raw_u;
        std::sort(u.begin(), u.end());
        const double base = wg.probability * h[static_cast<std::size_t>(nT)] * pu;
        // Latent choices: deletion sequences, or inserted labels and edges.
        Dists choice;
        const int total = nT > n0 ? nT : n0;
        if (nT < n0) {
          for (int j = 0; j < k; ++j) choice.push_back(std::vector<double>(static_cast<std::size_t>(n0), 1.0 / (n0 - j)));
        } else {
          for (int j = 0; j < k; ++j) choice.push_back(sm.node);
          for (int i = n0; i < total; ++i)
            for (int j = 0; j < i; ++j) choice.push_back(sm.edge);
        }
        for_each_outcome(choice, [&](const std::vector<int>& ch, double pc) {
          std::vector<int> act(static_cast<std::size_t>(total), 0), label(static_cast<std::size_t>(total), 0),
              mark(static_cast<std::size_t>(total), -1);
          std::vector<bool> present(static_cast<std::size_t>(total), true);
          std::vector<int> e0(static_cast<std::size_t>(total * total), cs.no_bond());
          for (int i = 0; i < n0; ++i) {
            label[static_cast<std::size_t>(i)] = g.node(i);
            for (int j = 0; j < n0; ++j) e0[static_cast<std::size_t>(i * total + j)] = g.edge(i, j);
          }
          if (nT < n0) {
            // Partial Fisher-Yates over the pool, as an ordered sequence of distinct nodes.
            std::vector<int> pool(static_cast<std::size_t>(n0));
            std::iota(pool.begin(), pool.end(), 0);
            for (int j = 0; j < k; ++j) {
              const int pick = j + ch[static_cast<std::size_t>(j)];
              if (pick >= n0) return;
              std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick)]);
              const int node = pool[static_cast<std::size_t>(j)];
              const int uj = u[static_cast<std::size_t>(j)];
              if (t == uj) mark[static_cast<std::size_t>(node)] = 1;
              if (t > uj) present[static_cast<std::size_t>(node)] = false;
            }
          } else {
            std::size_t c = 0;
            for (int j = 0; j < k; ++j) {
              const int i = n0 + j;
              label[static_cast<std::size_t>(i)] = ch[c++];
              act[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(j)];
              present[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(j)] <= t;
            }
            for (int i = n0; i < total; ++i)
              for (int j = 0; j < i; ++j) {
                e0[static_cast<std::size_t>(i * total + j)] = ch[c];
                e0[static_cast<std::size_t>(j * total + i)] = ch[c++];
              }
          }
          std::vector<int> order;
          for (int i = 0; i < total; ++i)
            if (present[static_cast<std::size_t>(i)]) order.push_back(i);
          const int m = static_cast<int>(order.size());
          Dists noise_d;
          for (int i : order)
            if (mark[static_cast<std::size_t>(i)] < 0)
              noise_d.push_back(kernel_row(sched.alpha_bar_ratio(Channel::nodes, act[static_cast<std::size_t>(i)], t),
                                           noise.node, label[static_cast<std::size_t>(i)]));
          for (int x = 0; x < m; ++x)
            for (int y = x + 1; y < m; ++y) {
              const int i = order[static_cast<std::size_t>(x)], j = order[static_cast<std::size_t>(y)];
              if (mark[static_cast<std::size_t>(i)] >= 0 || mark[static_cast<std::size_t>(j)] >= 0) continue;
              const int s = std::max(act[static_cast<std::size_t>(i)], act[static_cast<std::size_t>(j)]);
              noise_d.push_back(kernel_row(sched.alpha_bar_ratio(Channel::edges, s, t), noise.edge,
                                           e0[static_cast<std::size_t>(i * total + j)]));
            }
          for_each_outcome(noise_d, [&](const std::vector<int>& nz, double pn) {
            GraphState o(data.front().graph.space_ptr(), t);
            std::size_t c = 0;
            int dstar = 0;
            for (int i : order) {
              if (mark[static_cast<std::size_t>(i)] >= 0) {
                o.add_node(cs.node_del_star());
                ++dstar;
              } else {
                o.add_node(nz[c++]);
              }
            }
            for (int x = 0; x < m; ++x)
              for (int y = x + 1; y < m; ++y) {
                const int mk = o.expected_edge_mark(x, y);
                o.set_edge(x, y, mk >= 0 ? mk : nz[c++]);
              }
            const double w = base * pc * pn;
            std::vector<int> perm(static_cast<std::size_t>(m));
            std::iota(perm.begin(), perm.end(), 0);
            double fact = 1.0;
            for (int q = 2; q <= m; ++q) fact *= q;
            do {
              const GraphState op = o.reindex(perm);
              auto [it, fresh] = en.predict.try_emplace(exact_key(op));
              Joint& jt = it->second;
              if (fresh) {
                jt.obs = op;
                jt.node = Eigen::MatrixXd::Zero(m, a);
                jt.edge = Eigen::MatrixXd::Zero(m * m, b);
                jt.time = Eigen::MatrixXd::Zero(m, T + 1);
              }
              const double wp = w / fact;
              jt.z += wp;
              for (int x = 0; x < m; ++x) {
                const int i = order[static_cast<std::size_t>(perm[static_cast<std::size_t>(x)])];
                jt.node(x, label[static_cast<std::size_t>(i)]) += wp;
                jt.time(x, act[static_cast<std::size_t>(i)]) += wp;
                for (int y = 0; y < m; ++y) {
                  if (y == x) continue;
                  const int j = order[static_cast<std::size_t>(perm[static_cast<std::size_t>(y)])];
                  jt.edge(x * m + y, e0[static_cast<std::size_t>(i * total + j)]) += wp;
                }
              }
              const GraphState stripped = strip_marked_nodes(op, DeletionMark::del_star);
              auto [ct, cfresh] = en.count.try_emplace(exact_key(stripped));
              if (cfresh) ct->second = {stripped, Eigen::VectorXd::Zero(sp.n_max + 1)};
              ct->second.second(dstar) += wp;
            } while (std::next_permutation(perm.begin(), perm.end()));
          });
        });
      });
    }
  }
  return en;
}

void compare_with_enumeration(const std::vector<WeightedGraph>& data, const ScheduleSet& sched, const SizeParams& sp,
                              const NoiseMarginals& noise) {
  const OracleDenoiser oracle(data, sched, sp, noise);
  for (int t = 1; t <= sched.T(); ++t) {
    const Enumeration en = enumerate_forward(data, sched, sp, noise, t);
    ASSERT_FALSE(en.predict.empty());
    double worst = 0.0;
    for (const auto& [key, jt] : en.predict) {
      if (jt.obs.size() == 0) continue;
      const DenoiserOutput out = oracle.predict(jt.obs, GuideVector::none());
      const int m = jt.obs.size();
      worst = std::max(worst, (out.node_probs - jt.node / jt.z).cwiseAbs().maxCoeff());
      worst = std::max(worst, (out.time_probs - jt.time / jt.z).cwiseAbs().maxCoeff());
      for (int x = 0; x < m; ++x)
        for (int y = 0; y < m; ++y)
          if (x != y) worst = std::max(worst, (out.edge(x, y) - jt.edge.row(x * m + y).transpose() / jt.z).cwiseAbs().maxCoeff());
      EXPECT_LE(out.max_contract_error(), 1e-12);
    }
    EXPECT_LE(worst, 1e-10) << "t = " << t;
    double worst_count = 0.0;
    for (const auto& [key, entry] : en.count) {
      if (entry.first.size() == 0) continue;
      const Eigen::VectorXd c = oracle.predict_del_count(entry.first, GuideVector::none());
      worst_count = std::max(worst_count, (c - entry.second / entry.second.sum()).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(worst_count, 1e-10) << "t = " << t;
  }
  EXPECT_EQ(oracle.zero_evidence_queries(), 0);
}

std::vector<WeightedGraph> weighted(const ToySpec& spec) {
  std::vector<WeightedGraph> out;
  double w = 1.0;
  for (const auto& c : enumerate_toy_family(spec)) out.push_back({c.graph, w++});
  return out;
}

TEST(OracleDenoiser, MatchesLiteralForwardEnumeration) {
  ToySpec spec;
  spec.max_nodes = 2;
  const auto data = weighted(spec);
  ASSERT_EQ(data.size(), 5u);
  const ScheduleSet sched = build_schedules(6, 0.15, 3.0, 1.0, 1.5);
  const SizeParams sp{3, 0.2, 1.0};
  const NoiseMarginals noise{Eigen::Vector2d(0.6, 0.4), Eigen::Vector2d(0.7, 0.3)};
  compare_with_enumeration(data, sched, sp, noise);
}

TEST(OracleDenoiser, ThreeInsertionsMatchEnumeration) {
  ToySpec spec;
  spec.max_nodes = 2;
  spec.atoms = {"C"};
  const auto data = weighted(spec);
  ASSERT_EQ(data.size(), 2u);
  const ScheduleSet sched = build_schedules(5, 0.2, 2.5, 1.0, 1.5);
  const SizeParams sp{4, 0.2, 1.0};
  const NoiseMarginals noise{Eigen::VectorXd::Ones(1), Eigen::Vector2d(0.55, 0.45)};
  compare_with_enumeration(data, sched, sp, noise);
}

TEST(OracleDenoiser, ContractAndEquivariance) {
  ToySpec spec;
  const auto classes = enumerate_toy_family(spec);
  std::vector<WeightedGraph> data;
  for (const auto& c : classes) data.push_back({c.graph, c.probability});
  const ScheduleSet sched = build_schedules(20, 0.05, 10.0, 1.0, 1.5);
  const OracleDenoiser oracle(data, sched, {4, 0.2, 1.0}, {Eigen::Vector2d(0.7, 0.3), Eigen::Vector2d(0.6, 0.4)});
  const auto cs = data.front().graph.space_ptr();
  GraphState g = make_graph(cs, {0, 1, 0, 0}, {{0, 1, 1}, {1, 2, 1}, {0, 3, 1}});
  g.set_timestep(9);
  const GraphState gd = apply_node_deletion_mark(g, 3, DeletionMark::del_star);
  for (const GraphState& obs : {g, gd}) {
    const auto base = oracle.predict(obs, GuideVector::none());
    EXPECT_LE(base.max_contract_error(), 1e-12);
    const std::vector<int> order{2, 0, 3, 1};
    const auto out = oracle.predict(obs.reindex(order), GuideVector::none());
    for (int x = 0; x < 4; ++x) {
      EXPECT_LE((out.node(x) - base.node(order[static_cast<std::size_t>(x)])).cwiseAbs().maxCoeff(), 1e-14);
      EXPECT_LE((out.time(x) - base.time(order[static_cast<std::size_t>(x)])).cwiseAbs().maxCoeff(), 1e-14);
      for (int y = 0; y < 4; ++y)
        EXPECT_LE((out.edge(x, y) - base.edge(order[static_cast<std::size_t>(x)], order[static_cast<std::size_t>(y)]))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-14);
    }
    // Time mass is confined to [0, t].
    EXPECT_EQ(base.time_probs.rightCols(20 - 9).cwiseAbs().maxCoeff(), 0.0);
  }
  // DEL* rows are deleted originals: activation time 0.
  EXPECT_NEAR(oracle.predict(gd, GuideVector::none()).time(3)(0), 1.0, 1e-12);
  const Eigen::VectorXd count = oracle.predict_del_count(g, GuideVector::none());
  EXPECT_NEAR(count.sum(), 1.0, 1e-12);
  EXPECT_THROW(oracle.predict_del_count(gd, GuideVector::none()), Error);
  const auto terminal = oracle.terminal_size_distribution();
  EXPECT_NEAR(std::accumulate(terminal.begin(), terminal.end(), 0.0), 1.0, 1e-12);
}

}  // namespace
}  // namespace griddd
