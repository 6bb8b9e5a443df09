#include "griddd/padding.hpp"

#include <gtest/gtest.h>

namespace griddd {
namespace {

CategorySpacePtr space() { return make_space({"C", "O"}, {"no-bond", "single"}); }

TEST(Padding, SpaceAddsOneAtomType) {
  const auto cs = space();
  const auto padded = padded_space(*cs);
  EXPECT_EQ(padded->num_node_types(), 3);
  EXPECT_EQ(padded->node_label(2), kPadLabel);
  EXPECT_EQ(padded->edge_types(), cs->edge_types());
  EXPECT_THROW(padded_space(*padded), ConfigError);
}

TEST(Padding, PadThenUnpadIsIdentity) {
  const auto cs = space();
  const auto padded = padded_space(*cs);
  const GraphState g = make_graph(cs, {0, 1, 0}, {{0, 1, 1}, {1, 2, 1}});
  const GraphState p = pad_graph(g, 5, padded);
  EXPECT_EQ(p.size(), 5);
  EXPECT_EQ(p.count_nodes(padded->node_index(kPadLabel)), 2);
  for (int i = 3; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (j != i) {
        EXPECT_EQ(p.edge(i, j), padded->no_bond());
      }
  EXPECT_EQ(unpad_graph(p, cs), g);
  EXPECT_EQ(pad_graph(g, 3, padded).size(), 3);
  EXPECT_THROW(pad_graph(g, 2, padded), ConfigError);
}

TEST(Padding, UnpadDropsEdgesTouchingPadRows) {
  const auto cs = space();
  const auto padded = padded_space(*cs);
  // A sampled graph may bond a PAD row; the bond disappears with the row.
  const GraphState s = make_graph(padded, {0, 2, 1, 2}, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
  const GraphState u = unpad_graph(s, cs);
  EXPECT_EQ(u, make_graph(cs, {0, 1}, {{0, 1, 1}}));
  EXPECT_TRUE(unpad_graph(make_graph(padded, {2, 2}, {}), cs).empty());
}

TEST(Padding, PadRecordsKeepProperties) {
  const auto cs = space();
  const auto padded = padded_space(*cs);
  const auto recs = pad_records({make_record(make_graph(cs, {0}, {}), {{"mw", 12.011}})}, 4, padded);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].graph.size(), 4);
  EXPECT_DOUBLE_EQ(recs[0].properties.at("mw"), 12.011);
}

TEST(Padding, AblationRowAndReport) {
  const auto cs = space();
  const std::vector<GraphState> graphs{make_graph(cs, {0, 0}, {{0, 1, 1}}), make_graph(cs, {0, 1, 0}, {{0, 1, 1}}),
                                       make_graph(cs, {1, 1}, {{0, 1, 1}})};
  const AblationRow r = ablation_row("pad", graphs, ValenceTable::standard(), 0.5, 0.25);
  EXPECT_EQ(r.samples, 3);
  EXPECT_NEAR(r.validity, 1.0, 1e-12);  // valence only: the two-fragment graph counts
  EXPECT_NEAR(r.avg_nc, 4.0 / 3.0, 1e-12);
  EXPECT_EQ(r.max_nc, 2);
  EXPECT_EQ(r.nsc, 2);
  const json j = ablation_to_json({r});
  for (const char* key : {"model", "Val", "Avg NC", "Max NC", "NSC", "XCE", "ECE", "samples"}) EXPECT_TRUE(j[0].contains(key));
  const std::string table = ablation_table({r});
  for (const char* col : {"Val", "Avg NC", "Max NC", "NSC", "XCE", "ECE"}) EXPECT_NE(table.find(col), std::string::npos);
  EXPECT_NE(table.find("pad"), std::string::npos);
}

}  // namespace
}  // namespace griddd
