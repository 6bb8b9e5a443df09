#include "griddd/canonical.hpp"

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "griddd/random.hpp"

namespace griddd {
namespace {

CategorySpacePtr space() { return make_space({"C", "N", "O"}, {"no-bond", "single", "double"}); }

GraphState random_graph(const CategorySpacePtr& cs, int n, Rng& rng) {
  GraphState g(cs);
  std::uniform_int_distribution<int> label(0, 2);
  for (int i = 0; i < n; ++i) g.add_node(label(rng));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.set_edge(i, j, label(rng));
  return g;
}

TEST(Canonical, KeyIsInvariantUnderRelabelling) {
  const auto cs = space();
  Rng rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const GraphState g = random_graph(cs, 1 + trial % 6, rng);
    std::vector<int> order(static_cast<std::size_t>(g.size()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    EXPECT_EQ(canonical_key(g), canonical_key(g.reindex(order)));
  }
}

TEST(Canonical, RepresentativeCarriesTheKey) {
  const auto cs = space();
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const GraphState g = random_graph(cs, 2 + trial % 5, rng);
    const CanonicalForm cf = canonical_form(g);
    const GraphState rep = g.reindex(cf.order);
    std::vector<int> id(static_cast<std::size_t>(rep.size()));
    std::iota(id.begin(), id.end(), 0);
    EXPECT_EQ(encode_ordered(rep, id), cf.key);
    EXPECT_EQ(canonical_form(rep).key, cf.key);
  }
}

TEST(Canonical, DistinguishesNonIsomorphicGraphs) {
  const auto cs = space();
  const GraphState path = make_graph(cs, {0, 0, 0}, {{0, 1, 1}, {1, 2, 1}});
  const GraphState tri = make_graph(cs, {0, 0, 0}, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
  const GraphState dbl = make_graph(cs, {0, 0, 0}, {{0, 1, 2}, {1, 2, 1}});
  const GraphState oxo = make_graph(cs, {0, 2, 0}, {{0, 1, 1}, {1, 2, 1}});
  const GraphState oend = make_graph(cs, {2, 0, 0}, {{0, 1, 1}, {1, 2, 1}});
  const std::vector<std::string> keys{canonical_key(path), canonical_key(tri), canonical_key(dbl),
                                      canonical_key(oxo), canonical_key(oend)};
  for (std::size_t a = 0; a < keys.size(); ++a)
    for (std::size_t b = a + 1; b < keys.size(); ++b) EXPECT_NE(keys[a], keys[b]);
}

TEST(Canonical, RejectsLargeGraphs) {
  const auto cs = space();
  Rng rng(1);
  EXPECT_NO_THROW(canonical_key(random_graph(cs, kMaxCanonicalNodes, rng)));
  EXPECT_THROW(canonical_key(random_graph(cs, kMaxCanonicalNodes + 1, rng)), Error);
  EXPECT_EQ(canonical_key(GraphState(cs)), canonical_key(GraphState(cs)));
}

}  // namespace
}  // namespace griddd
