#include "griddd/chem_metrics.hpp"

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "griddd/random.hpp"

namespace griddd {
namespace {

CategorySpacePtr space() { return make_space({"C", "N", "O", "F"}, {"no-bond", "single", "double", "triple"}); }

TEST(ChemMetrics, ValidityExamples) {
  const auto cs = space();
  const auto table = ValenceTable::standard();
  // Ethanol heavy atoms, carbon dioxide, a five-bonded carbon and two fragments.
  EXPECT_TRUE(check_validity(make_graph(cs, {0, 0, 2}, {{0, 1, 1}, {1, 2, 1}}), table).valid);
  EXPECT_TRUE(check_validity(make_graph(cs, {2, 0, 2}, {{0, 1, 2}, {1, 2, 2}}), table).valid);
  const auto over = check_validity(make_graph(cs, {0, 0, 0}, {{0, 1, 3}, {0, 2, 2}}), table);
  EXPECT_FALSE(over.valid);
  EXPECT_EQ(over.reason, "valence");
  const auto frag = check_validity(make_graph(cs, {0, 2}, {}), table);
  EXPECT_EQ(frag.reason, "disconnected");
  EXPECT_TRUE(check_validity(make_graph(cs, {0, 2}, {}), table, false).valid);
  EXPECT_EQ(check_validity(GraphState(cs), table).reason, "empty");
  EXPECT_FALSE(check_validity(make_graph(cs, {3, 3, 3}, {{0, 1, 1}, {1, 2, 1}}), table).valid);
}

TEST(ChemMetrics, UnknownLabelsAndReservedEntriesAreErrors) {
  const auto table = ValenceTable::standard();
  const auto odd = make_space({"C", "Xe"}, {"no-bond", "single"});
  EXPECT_THROW(check_validity(make_graph(odd, {0, 1}, {{0, 1, 1}}), table), Error);
  EXPECT_THROW(molecular_weight(make_graph(odd, {1}, {}), table), Error);
  const auto cs = space();
  GraphState g = make_graph(cs, {0, 0}, {{0, 1, 1}});
  g.set_timestep(3);
  g = apply_node_deletion_mark(g, 1, DeletionMark::del_star);
  EXPECT_THROW(connected_components(g), Error);
}

TEST(ChemMetrics, MolecularWeight) {
  const auto cs = space();
  const auto table = ValenceTable::standard();
  EXPECT_NEAR(molecular_weight(make_graph(cs, {0, 0, 2}, {{0, 1, 1}, {1, 2, 1}}), table), 2 * 12.011 + 15.999, 1e-12);
}

// Components counted by union-find agree with a breadth-first count.
TEST(ChemMetrics, ComponentsMatchBreadthFirstSearch) {
  const auto cs = space();
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 9;
    GraphState g(cs);
    for (int i = 0; i < n; ++i) g.add_node(0);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) g.set_edge(i, j, uniform01(rng) < 0.2 ? 1 : 0);
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    int bfs = 0;
    for (int s = 0; s < n; ++s) {
      if (seen[static_cast<std::size_t>(s)]) continue;
      ++bfs;
      std::vector<int> queue{s};
      seen[static_cast<std::size_t>(s)] = true;
      while (!queue.empty()) {
        const int v = queue.back();
        queue.pop_back();
        for (int w = 0; w < n; ++w)
          if (w != v && g.edge(v, w) != 0 && !seen[static_cast<std::size_t>(w)]) {
            seen[static_cast<std::size_t>(w)] = true;
            queue.push_back(w);
          }
      }
    }
    EXPECT_EQ(connected_components(g), bfs);
  }
}

TEST(ChemMetrics, ComponentStats) {
  const auto cs = space();
  const std::vector<GraphState> gs{make_graph(cs, {0, 0}, {{0, 1, 1}}), make_graph(cs, {0, 0, 0}, {}),
                                   make_graph(cs, {0, 0, 0}, {{0, 1, 1}})};
  const auto s = component_stats(gs);
  EXPECT_EQ(s.count, 3);
  EXPECT_EQ(s.max_nc, 3);
  EXPECT_EQ(s.nsc, 1);
  EXPECT_NEAR(s.avg_nc, 2.0, 1e-12);
  EXPECT_EQ(component_stats({}).count, 0);
}

TEST(ChemMetrics, TanimotoCases) {
  const auto cs = space();
  const GraphState a = make_graph(cs, {0, 0, 2}, {{0, 1, 1}, {1, 2, 1}});
  const GraphState b = make_graph(cs, {2, 0, 0}, {{0, 1, 1}, {1, 2, 1}});
  const GraphState c = make_graph(cs, {3, 3}, {{0, 1, 1}});
  EXPECT_DOUBLE_EQ(similarity(a, b), 1.0);
  EXPECT_DOUBLE_EQ(similarity(a, a), 1.0);
  EXPECT_DOUBLE_EQ(similarity(a, c), 0.0);
  const double ab = similarity(a, make_graph(cs, {0, 0, 0}, {{0, 1, 1}, {1, 2, 1}}));
  EXPECT_GT(ab, 0.0);
  EXPECT_LT(ab, 1.0);
  EXPECT_DOUBLE_EQ(tanimoto(Fingerprint(64), Fingerprint(64)), 1.0);
  EXPECT_THROW(tanimoto(Fingerprint(64), Fingerprint(128)), Error);
  EXPECT_EQ(fingerprint(make_graph(cs, {0}, {})).count(), 1);
}

TEST(ChemMetrics, MaeProtocolSkipsInvalidSamples) {
  const auto cs = space();
  const auto table = ValenceTable::standard();
  const auto r = mae_protocol(
      {1.0, 2.0}, 2,
      [&](double y, int k) {
        if (k == 1) return make_graph(cs, {0, 0}, {});
        GraphState g(cs);
        for (int i = 0; i < static_cast<int>(y); ++i) g.add_node(0);
        for (int i = 0; i + 1 < g.size(); ++i) g.set_edge(i, i + 1, 1);
        return g;
      },
      [](const GraphState& g) { return g.size() + 0.5; },
      [&](const GraphState& g) { return check_validity(g, table).valid; });
  EXPECT_EQ(r.total, 4);
  EXPECT_EQ(r.valid, 2);
  EXPECT_NEAR(r.validity, 0.5, 1e-12);
  ASSERT_TRUE(r.mae.has_value());
  EXPECT_NEAR(*r.mae, 0.5, 1e-12);
  const auto none = mae_protocol(
      {1.0}, 1, [&](double, int) { return GraphState(cs); }, [](const GraphState&) { return 0.0; },
      [](const GraphState&) { return false; });
  EXPECT_FALSE(none.mae.has_value());
}

TEST(ChemMetrics, OptimizationProtocol) {
  const auto cs = space();
  auto chain = [&](int n, int last) {
    GraphState g(cs);
    for (int i = 0; i < n; ++i) g.add_node(i + 1 == n ? last : 0);
    for (int i = 0; i + 1 < n; ++i) g.set_edge(i, i + 1, 1);
    return g;
  };
  const auto size = [](const GraphState& g) { return static_cast<double>(g.size()); };
  const std::vector<GraphState> seeds{chain(4, 0), chain(3, 3)};
  const std::vector<std::vector<GraphState>> cands{{chain(5, 0), chain(6, 0), make_graph(cs, {2, 2}, {{0, 1, 2}})},
                                                   {make_graph(cs, {2}, {})}};
  OptimizationCriteria crit;
  crit.success_lo = 5.0;
  crit.success_hi = 10.0;
  const auto r = optimization_protocol(seeds, cands, size, crit);
  ASSERT_EQ(r.seeds.size(), 2u);
  EXPECT_TRUE(r.seeds[0].passed);
  EXPECT_NEAR(r.seeds[0].improvement, 2.0, 1e-12);
  EXPECT_FALSE(r.seeds[1].passed);
  EXPECT_EQ(r.seeds[1].improvement, 0.0);
  EXPECT_NEAR(r.mean_improvement, 1.0, 1e-12);
  EXPECT_NEAR(r.std_improvement, 1.0, 1e-12);
  EXPECT_NEAR(r.pass_rate, 0.5, 1e-12);
  EXPECT_NEAR(r.success_rate, 0.5, 1e-12);
  EXPECT_GT(r.diversity, 0.0);
  EXPECT_NEAR(r.mean_similarity, similarity(seeds[0], chain(6, 0)), 1e-12);
  EXPECT_THROW(optimization_protocol(seeds, {}, size, crit), Error);
}

TEST(ChemMetrics, MolecularWeightAnchorsAndAdditivity) {
  const auto cs = space();
  const auto table = ValenceTable::standard();
  EXPECT_EQ(molecular_weight(GraphState(cs), table), 0.0);
  EXPECT_NEAR(molecular_weight(make_graph(cs, {0}, {}), table), 12.011, 1e-12);
  const GraphState a = make_graph(cs, {0, 2}, {{0, 1, 2}});
  const GraphState b = make_graph(cs, {1, 0, 3}, {{0, 1, 1}, {1, 2, 1}});
  const GraphState both = make_graph(cs, {0, 2, 1, 0, 3}, {{0, 1, 2}, {2, 3, 1}, {3, 4, 1}});
  EXPECT_NEAR(molecular_weight(both, table), molecular_weight(a, table) + molecular_weight(b, table), 1e-12);
}

TEST(ChemMetrics, TanimotoOfNestedBitSets) {
  Fingerprint a(64), b(64);
  for (int k : {1, 5, 9}) a.set(k);
  for (int k : {1, 5, 9, 20, 40, 63}) b.set(k);
  EXPECT_DOUBLE_EQ(tanimoto(a, b), 0.5);
}

TEST(ChemMetrics, ValidityIsPermutationInvariant) {
  const auto cs = space();
  const auto table = ValenceTable::standard();
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    GraphState g(cs);
    for (int i = 0; i < n; ++i) g.add_node(static_cast<int>(uniform01(rng) * 4));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) g.set_edge(i, j, uniform01(rng) < 0.4 ? 1 + static_cast<int>(uniform01(rng) * 3) : 0);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const GraphState h = g.reindex(order);
    EXPECT_EQ(check_validity(g, table).valid, check_validity(h, table).valid);
    EXPECT_NEAR(molecular_weight(g, table), molecular_weight(h, table), 1e-9);
    EXPECT_EQ(connected_components(g), connected_components(h));
  }
}

TEST(ChemMetrics, MaeProtocolStubs) {
  const auto cs = space();
  const auto table = ValenceTable::standard();
  // The generated graph's "property" is read back from its size.
  auto chain = [&](double y) {
    GraphState g(cs);
    for (int i = 0; i < static_cast<int>(y); ++i) g.add_node(0);
    for (int i = 0; i + 1 < g.size(); ++i) g.set_edge(i, i + 1, 1);
    return g;
  };
  const auto size = [](const GraphState& g) { return static_cast<double>(g.size()); };
  const auto valid = [&](const GraphState& g) { return check_validity(g, table).valid; };
  const std::vector<double> targets{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(*mae_protocol(targets, 3, [&](double y, int) { return chain(y); }, size, valid).mae, 0.0);
  EXPECT_DOUBLE_EQ(*mae_protocol(targets, 3, [&](double y, int) { return chain(y + 2); }, size, valid).mae, 2.0);
}

TEST(ChemMetrics, IdentityOptimizer) {
  const auto cs = space();
  const std::vector<GraphState> seeds{make_graph(cs, {0, 0, 2}, {{0, 1, 1}, {1, 2, 1}}), make_graph(cs, {1}, {})};
  std::vector<std::vector<GraphState>> cands;
  for (const auto& s : seeds) cands.push_back({s});
  const auto mw = [table = ValenceTable::standard()](const GraphState& g) { return molecular_weight(g, table); };
  OptimizationCriteria crit;
  crit.success_lo = std::min(mw(seeds[0]), mw(seeds[1]));
  crit.success_hi = std::max(mw(seeds[0]), mw(seeds[1]));
  const auto r = optimization_protocol(seeds, cands, mw, crit);
  EXPECT_EQ(r.mean_improvement, 0.0);
  EXPECT_DOUBLE_EQ(r.mean_similarity, 1.0);
  EXPECT_DOUBLE_EQ(r.pass_rate, 1.0);
  EXPECT_DOUBLE_EQ(r.success_rate, 1.0);
}

}  // namespace
}  // namespace griddd
