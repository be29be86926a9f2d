// Independent reference implementations used to cross-check the library.
// Deliberately naive: bit-mask edge sets, explicit reachability, full
// permutation scans.
#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "vsgae/graph.hpp"

namespace oracle {

using vsgae::CellGraph;
using vsgae::Edge;
using vsgae::NodeType;

inline std::vector<std::pair<int, int>> upper_pairs(int n) {
  std::vector<std::pair<int, int>> p;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) p.emplace_back(u, v);
  return p;
}

// Every node lies on an Input -> Output path iff it has a predecessor (except
// Input) and a successor (except Output) in an upper-triangular DAG.
inline bool structurally_valid(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> in(static_cast<std::size_t>(n), 0), out(static_cast<std::size_t>(n), 0);
  for (auto [u, v] : edges) {
    ++out[static_cast<std::size_t>(u)];
    ++in[static_cast<std::size_t>(v)];
  }
  for (int v = 1; v < n; ++v)
    if (in[static_cast<std::size_t>(v)] == 0) return false;
  for (int v = 0; v + 1 < n; ++v)
    if (out[static_cast<std::size_t>(v)] == 0) return false;
  return true;
}

/// All canonical cells of exactly n nodes with at most max_edges edges.
inline std::vector<CellGraph> brute_force_enumerate(int n, int max_edges = 9) {
  const auto pairs = upper_pairs(n);
  std::vector<CellGraph> out;
  const int interior = n - 2;
  int labelings = 1;
  for (int i = 0; i < interior; ++i) labelings *= 3;
  for (unsigned mask = 0; mask < (1u << pairs.size()); ++mask) {
    std::vector<std::pair<int, int>> chosen;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (mask & (1u << i)) chosen.push_back(pairs[i]);
    if (static_cast<int>(chosen.size()) > max_edges || !structurally_valid(n, chosen)) continue;
    for (int code = 0; code < labelings; ++code) {
      std::vector<NodeType> labels{NodeType::Input};
      int c = code;
      for (int i = 0; i < interior; ++i) {
        labels.push_back(vsgae::kOperations[static_cast<std::size_t>(c % 3)]);
        c /= 3;
      }
      labels.push_back(NodeType::Output);
      std::vector<Edge> e;
      for (auto [u, v] : chosen) e.push_back({u, v});
      out.emplace_back(labels, e);
    }
  }
  return out;
}

/// Minimum over every bijection fixing Input and Output.
inline int brute_force_edit_distance(const CellGraph& a, const CellGraph& b) {
  const int n = a.size();
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::set<std::pair<int, int>> eb;
  for (const auto& e : b.edges()) eb.emplace(e.from, e.to);
  int best = 1 << 30;
  do {
    if (perm.front() != 0 || perm.back() != n - 1) continue;
    int cost = 0;
    for (int v = 0; v < n; ++v)
      if (a.label(v) != b.label(perm[static_cast<std::size_t>(v)])) ++cost;
    std::set<std::pair<int, int>> ea;
    for (const auto& e : a.edges())
      ea.emplace(perm[static_cast<std::size_t>(e.from)], perm[static_cast<std::size_t>(e.to)]);
    for (const auto& e : ea)
      if (!eb.count(e)) ++cost;
    for (const auto& e : eb)
      if (!ea.count(e)) ++cost;
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace oracle
