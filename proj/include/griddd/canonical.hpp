#pragma once

// Canonical node orderings of small graphs by exhaustive permutation search.
// Two graphs are isomorphic (labels included) iff their canonical keys match.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "griddd/error.hpp"
#include "griddd/graph.hpp"

namespace griddd {

inline constexpr int kMaxCanonicalNodes = 9;

/// Node labels followed by the upper triangle of the edge matrix, one char each.
inline std::string encode_ordered(const GraphState& g, const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  std::string key;
  key.reserve(static_cast<std::size_t>(n + n * (n - 1) / 2 + 1));
  key.push_back(static_cast<char>('0' + n));
  for (int a = 0; a < n; ++a) key.push_back(static_cast<char>('A' + g.node(order[static_cast<std::size_t>(a)])));
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      key.push_back(static_cast<char>(
          'a' + g.edge(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)])));
  return key;
}

struct CanonicalForm {
  std::string key;
  std::vector<int> order;  // g.reindex(order) is the canonical representative
};

inline CanonicalForm canonical_form(const GraphState& g) {
  const int n = g.size();
  if (n > kMaxCanonicalNodes) throw Error("canonical form limited to " + std::to_string(kMaxCanonicalNodes) + " nodes");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  // Nodes sorted by label first keeps the search small when labels differ.
  std::sort(perm.begin(), perm.end(), [&](int a, int b) { return g.node(a) < g.node(b); });
  CanonicalForm best{encode_ordered(g, perm), perm};
  auto same_label_run = [&](const std::vector<int>& p) {
    for (std::size_t k = 1; k < p.size(); ++k)
      if (g.node(p[k - 1]) > g.node(p[k])) return false;
    return true;
  };
  std::vector<int> p = perm;
  while (std::next_permutation(p.begin(), p.end(), [&](int a, int b) {
    return g.node(a) != g.node(b) ? g.node(a) < g.node(b) : a < b;
  })) {
    if (!same_label_run(p)) continue;
    std::string key = encode_ordered(g, p);
    if (key < best.key) best = {std::move(key), p};
  }
  return best;
}

inline std::string canonical_key(const GraphState& g) { return canonical_form(g).key; }

}  // namespace griddd
