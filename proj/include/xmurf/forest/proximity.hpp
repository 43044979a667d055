#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "../core/dataset.hpp"
#include "../core/parallel.hpp"
#include "unsupervised_forest.hpp"

namespace xmurf::forest {

/// Node ids visited by one datapoint in one tree, root first.
struct PathSet {
  std::vector<int> node_ids;
  bool operator==(const PathSet&) const = default;
};

inline PathSet path(std::span<const double> x, const Tree& tree) {
  PathSet p;
  int n = tree.root;
  p.node_ids.push_back(n);
  while (!tree.nodes[static_cast<std::size_t>(n)].is_leaf()) {
    const auto& node = tree.nodes[static_cast<std::size_t>(n)];
    n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    p.node_ids.push_back(n);
  }
  return p;
}

/// Jaccard index |A n B| / (|A| + |B| - |A n B|) of two paths through the same tree.
inline double path_proximity_tree(const PathSet& a, const PathSet& b) {
  std::vector<int> sa(a.node_ids), sb(b.node_ids);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<int> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  const auto inter = static_cast<double>(common.size());
  return inter / (static_cast<double>(sa.size() + sb.size()) - inter);
}

namespace detail {

// Parent and depth arrays so two leaves' shared path length is their LCA depth + 1.
struct TreeIndex {
  std::vector<int> parent;
  std::vector<int> depth;

  explicit TreeIndex(const Tree& t) : parent(t.nodes.size(), -1), depth(t.nodes.size(), 0) {
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) continue;
      for (int c : {n.left, n.right}) {
        parent[static_cast<std::size_t>(c)] = n.id;
        depth[static_cast<std::size_t>(c)] = depth[static_cast<std::size_t>(n.id)] + 1;
      }
    }
  }

  int shared_length(int a, int b) const {
    while (depth[static_cast<std::size_t>(a)] > depth[static_cast<std::size_t>(b)]) a = parent[static_cast<std::size_t>(a)];
    while (depth[static_cast<std::size_t>(b)] > depth[static_cast<std::size_t>(a)]) b = parent[static_cast<std::size_t>(b)];
    while (a != b) {
      a = parent[static_cast<std::size_t>(a)];
      b = parent[static_cast<std::size_t>(b)];
    }
    return depth[static_cast<std::size_t>(a)] + 1;
  }
};

}  // namespace detail

/// Forest path proximity P_ij = (1/B) sum_b Jaccard(T_ib, T_jb) over every row of `data`.
///
/// Node ids in this implementation are BFS-ordered, so children are created
/// after their parents (TreeIndex relies on that). Each worker owns row i and
/// writes cells (i, j) and (j, i) for j > i; the per-pair sum runs over trees
/// in order, so results are identical for any thread count.
inline ProximityMatrix proximity_matrix(const Forest& forest, const Dataset& data,
                                        unsigned threads = 1) {
  if (data.cols() != forest.num_features)
    throw ConfigError("proximity_matrix: dataset has " + std::to_string(data.cols()) +
                      " features, forest expects " + std::to_string(forest.num_features));
  const std::size_t m = data.rows();
  const std::size_t b_count = forest.trees.size();
  std::vector<detail::TreeIndex> index;
  index.reserve(b_count);
  for (const auto& t : forest.trees) index.emplace_back(t);

  std::vector<int> leaf(b_count * m);
  parallel_for(m, threads, [&](std::size_t i) {
    for (std::size_t b = 0; b < b_count; ++b) leaf[b * m + i] = forest.trees[b].leaf_of(data.row(i));
  });

  ProximityMatrix p(data.ids);
  parallel_for(m, threads, [&](std::size_t i) {
    p(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      double sum = 0.0;
      for (std::size_t b = 0; b < b_count; ++b) {
        const int li = leaf[b * m + i];
        const int lj = leaf[b * m + j];
        const auto& idx = index[b];
        const double len_i = idx.depth[static_cast<std::size_t>(li)] + 1;
        const double len_j = idx.depth[static_cast<std::size_t>(lj)] + 1;
        const double shared = li == lj ? len_i : idx.shared_length(li, lj);
        sum += shared / (len_i + len_j - shared);
      }
      const double v = sum / static_cast<double>(b_count);
      p(i, j) = v;
      p(j, i) = v;
    }
  });
  return p;
}

/// Lower bound (1/B) sum_b 1 / (|T_ib| + |T_jb| - 1) implied by the shared root.
inline double root_sharing_bound(const Forest& forest, std::span<const double> xi,
                                 std::span<const double> xj) {
  double sum = 0.0;
  for (const auto& t : forest.trees) {
    const auto li = static_cast<double>(path(xi, t).node_ids.size());
    const auto lj = static_cast<double>(path(xj, t).node_ids.size());
    sum += 1.0 / (li + lj - 1.0);
  }
  return sum / static_cast<double>(forest.trees.size());
}

}  // namespace xmurf::forest
