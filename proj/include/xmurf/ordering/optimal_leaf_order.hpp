#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "linkage.hpp"

namespace xmurf::ordering {

/// Sum of 1 - P over adjacent positions of an order.
inline double adjacent_dissimilarity(const ProximityMatrix& p, const std::vector<std::size_t>& order) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) s += 1.0 - p(order[k], order[k + 1]);
  return s;
}

/// Leaf order that minimizes adjacent dissimilarity among the 2^(M-1) orders
/// obtained by flipping dendrogram children.
///
/// cost[u][w] holds the best cost of laying out the subtree rooted at
/// LCA(u, w) from leaf u to leaf w. Each pair has exactly one LCA, so one
/// M x M table (plus the two inner argmins) covers every node. Per node the
/// inner minimum is split in two passes, giving O(M^3) overall.
/// Ties resolve toward the lowest leaf ids in scan order.
inline std::vector<std::size_t> optimal_leaf_order(const Dendrogram& d, const ProximityMatrix& p) {
  const std::size_t m = d.leaves;
  if (p.size() != m) throw ConfigError("optimal_leaf_order: matrix size does not match dendrogram");
  if (m <= 2) return leaf_order(d);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto leaves = node_leaves(d);
  std::vector<int> parent(2 * m - 1, -1);
  for (std::size_t s = 0; s < d.merges.size(); ++s) {
    parent[static_cast<std::size_t>(d.merges[s].left)] = static_cast<int>(m + s);
    parent[static_cast<std::size_t>(d.merges[s].right)] = static_cast<int>(m + s);
  }
  std::vector<double> cost(m * m, kInf);
  // Set only for (u, w) with u under the left child of LCA(u, w).
  std::vector<int> inner_left(m * m, -1), inner_right(m * m, -1);
  auto at = [m](std::size_t u, std::size_t w) { return u * m + w; };
  auto under = [&](std::size_t u, int node) {
    for (int n = static_cast<int>(u); n >= 0; n = parent[static_cast<std::size_t>(n)])
      if (n == node) return true;
    return false;
  };
  // Leaves that may end a layout of `node` starting at u.
  auto partners = [&](int node, std::size_t u) -> const std::vector<std::size_t>& {
    if (static_cast<std::size_t>(node) < m) return leaves[static_cast<std::size_t>(node)];
    const auto& mg = d.merges[static_cast<std::size_t>(node) - m];
    return leaves[static_cast<std::size_t>(under(u, mg.left) ? mg.right : mg.left)];
  };
  auto sub_cost = [&](std::size_t u, std::size_t w) { return u == w ? 0.0 : cost[at(u, w)]; };

  std::vector<double> best_k(m);
  std::vector<int> arg_k(m);
  for (const auto& mg : d.merges) {
    const auto& left = leaves[static_cast<std::size_t>(mg.left)];
    const auto& right = leaves[static_cast<std::size_t>(mg.right)];
    for (std::size_t u : left) {
      // best_k[k] = min over admissible left ends e of cost(u..e) + d(e, k)
      const auto& ends = partners(mg.left, u);
      for (std::size_t k : right) {
        double best = kInf;
        int arg = -1;
        for (std::size_t e : ends) {
          const double c = sub_cost(u, e) + (1.0 - p(e, k));
          if (c < best) {
            best = c;
            arg = static_cast<int>(e);
          }
        }
        best_k[k] = best;
        arg_k[k] = arg;
      }
      for (std::size_t w : right) {
        double best = kInf;
        int arg = -1;
        for (std::size_t k : partners(mg.right, w)) {
          const double c = best_k[k] + sub_cost(k, w);
          if (c < best) {
            best = c;
            arg = static_cast<int>(k);
          }
        }
        cost[at(u, w)] = best;
        cost[at(w, u)] = best;
        inner_left[at(u, w)] = arg_k[static_cast<std::size_t>(arg)];
        inner_right[at(u, w)] = arg;
      }
    }
  }

  const auto& root = d.merges.back();
  double best = kInf;
  std::size_t bu = 0, bw = 0;
  for (std::size_t u : leaves[static_cast<std::size_t>(root.left)])
    for (std::size_t w : leaves[static_cast<std::size_t>(root.right)])
      if (cost[at(u, w)] < best) {
        best = cost[at(u, w)];
        bu = u;
        bw = w;
      }

  // layout(u, w) = layout(u, e) + layout(k, w); a layout walked from the
  // right side is the reverse, i.e. layout(w, k) + layout(e, u).
  std::vector<std::size_t> order;
  order.reserve(m);
  std::vector<std::pair<std::size_t, std::size_t>> stack{{bu, bw}};
  while (!stack.empty()) {
    const auto [u, w] = stack.back();
    stack.pop_back();
    if (u == w) {
      order.push_back(u);
    } else if (inner_left[at(u, w)] >= 0) {
      stack.push_back({static_cast<std::size_t>(inner_right[at(u, w)]), w});
      stack.push_back({u, static_cast<std::size_t>(inner_left[at(u, w)])});
    } else {
      stack.push_back({static_cast<std::size_t>(inner_left[at(w, u)]), w});
      stack.push_back({u, static_cast<std::size_t>(inner_right[at(w, u)])});
    }
  }
  return order;
}

}  // namespace xmurf::ordering
