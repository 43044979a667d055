#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "../core/dataset.hpp"

namespace xmurf::ordering {

enum class LinkageKind { average, single, complete };

inline std::string_view to_string(LinkageKind k) {
  switch (k) {
    case LinkageKind::average: return "average";
    case LinkageKind::single: return "single";
    case LinkageKind::complete: return "complete";
  }
  return "?";
}

inline LinkageKind linkage_kind_from_string(std::string_view s) {
  if (s == "average" || s == "upgma") return LinkageKind::average;
  if (s == "single") return LinkageKind::single;
  if (s == "complete") return LinkageKind::complete;
  throw ConfigError("unknown linkage '" + std::string(s) + "'");
}

/// One agglomeration step. Node ids follow the usual convention: leaves are
/// 0..M-1, the cluster created by merge k is M+k.
struct Merge {
  int left = 0;
  int right = 0;
  double height = 0.0;
  int size = 0;
  bool operator==(const Merge&) const = default;
};

struct Dendrogram {
  std::size_t leaves = 0;
  std::vector<Merge> merges;
  LinkageKind kind = LinkageKind::average;

  int root() const { return static_cast<int>(2 * leaves) - 2; }
  bool operator==(const Dendrogram&) const = default;
};

/// Checks the merge list: M-1 merges, each child used once and created
/// before its parent, sizes consistent, heights nondecreasing toward the root.
inline void validate(const Dendrogram& d) {
  const std::size_t m = d.leaves;
  if (m < 1) throw InvariantError("dendrogram has no leaves");
  if (d.merges.size() + 1 != m) throw InvariantError("dendrogram needs M-1 merges");
  std::vector<char> used(2 * m - 1, 0);
  std::vector<int> size(2 * m - 1, 1);
  std::vector<double> height(2 * m - 1, 0.0);
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const auto& mg = d.merges[k];
    const auto self = m + k;
    for (int c : {mg.left, mg.right}) {
      if (c < 0 || static_cast<std::size_t>(c) >= self)
        throw InvariantError("merge " + std::to_string(k) + " references an unknown node");
      if (used[static_cast<std::size_t>(c)]++)
        throw InvariantError("node " + std::to_string(c) + " merged twice");
      if (height[static_cast<std::size_t>(c)] > mg.height)
        throw InvariantError("merge " + std::to_string(k) + " is lower than its child");
    }
    size[self] = size[static_cast<std::size_t>(mg.left)] + size[static_cast<std::size_t>(mg.right)];
    height[self] = mg.height;
    if (size[self] != mg.size) throw InvariantError("merge " + std::to_string(k) + " has wrong size");
  }
}

namespace detail {

// Dense dissimilarity with per-row cached nearest neighbour (restricted to
// higher active indices). Each cluster lives in the slot of its lowest leaf.
class Agglomerator {
 public:
  Agglomerator(const ProximityMatrix& p, LinkageKind kind)
      : m_(p.size()), kind_(kind), d_(m_ * m_), active_(m_, 1), size_(m_, 1), node_(m_),
        nn_(m_, -1), nn_dist_(m_, kInf) {
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < m_; ++j) d_[i * m_ + j] = 1.0 - p(i, j);
    for (std::size_t i = 0; i < m_; ++i) node_[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < m_; ++i) refresh(i);
  }

  Dendrogram run() {
    Dendrogram out;
    out.leaves = m_;
    out.kind = kind_;
    out.merges.reserve(m_ - 1);
    std::vector<double> node_height(2 * m_ - 1, 0.0);
    for (std::size_t step = 0; step + 1 < m_; ++step) {
      std::size_t a = m_;
      for (std::size_t i = 0; i < m_; ++i)
        if (active_[i] && nn_[i] >= 0 && (a == m_ || nn_dist_[i] < nn_dist_[a])) a = i;
      const auto b = static_cast<std::size_t>(nn_[a]);
      // Rounding in the average update can dip a hair below a child height.
      const double h = std::max({nn_dist_[a], node_height[static_cast<std::size_t>(node_[a])],
                                 node_height[static_cast<std::size_t>(node_[b])]});
      const int created = static_cast<int>(m_ + step);
      out.merges.push_back({std::min(node_[a], node_[b]), std::max(node_[a], node_[b]), h, size_[a] + size_[b]});
      node_height[static_cast<std::size_t>(created)] = h;
      merge_into(a, b);
      node_[a] = created;
    }
    return out;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  double& d(std::size_t i, std::size_t j) { return d_[i * m_ + j]; }

  void refresh(std::size_t i) {
    nn_[i] = -1;
    nn_dist_[i] = kInf;
    for (std::size_t j = i + 1; j < m_; ++j)
      if (active_[j] && (nn_[i] < 0 || d(i, j) < nn_dist_[i])) {
        nn_[i] = static_cast<int>(j);
        nn_dist_[i] = d(i, j);
      }
  }

  void merge_into(std::size_t a, std::size_t b) {
    const double na = size_[a];
    const double nb = size_[b];
    for (std::size_t k = 0; k < m_; ++k) {
      if (!active_[k] || k == a || k == b) continue;
      double v = 0.0;
      switch (kind_) {
        case LinkageKind::average: v = (na * d(a, k) + nb * d(b, k)) / (na + nb); break;
        case LinkageKind::single: v = std::min(d(a, k), d(b, k)); break;
        case LinkageKind::complete: v = std::max(d(a, k), d(b, k)); break;
      }
      d(a, k) = v;
      d(k, a) = v;
    }
    active_[b] = 0;
    size_[a] += size_[b];
    for (std::size_t k = 0; k < m_; ++k) {
      if (!active_[k]) continue;
      if (k == a || nn_[k] == static_cast<int>(a) || nn_[k] == static_cast<int>(b)) {
        refresh(k);
      } else if (k < a && (d(k, a) < nn_dist_[k] || (d(k, a) == nn_dist_[k] && static_cast<int>(a) < nn_[k]))) {
        nn_[k] = static_cast<int>(a);
        nn_dist_[k] = d(k, a);
      }
    }
  }

  std::size_t m_;
  LinkageKind kind_;
  std::vector<double> d_;
  std::vector<char> active_;
  std::vector<int> size_;
  std::vector<int> node_;
  std::vector<int> nn_;
  std::vector<double> nn_dist_;
};

}  // namespace detail

/// Agglomerative clustering on d_ij = 1 - P_ij. Clusters are identified by
/// their lowest leaf index; among equally close pairs the lexicographically
/// lowest (i, j) merges first, and the merge lists the lower node id as left.
inline Dendrogram linkage(const ProximityMatrix& p, LinkageKind kind = LinkageKind::average) {
  if (p.size() < 2) throw ConfigError("linkage needs at least 2 points");
  validate(p);
  return detail::Agglomerator(p, kind).run();
}

/// Leaves in left-to-right order, left child first.
inline std::vector<std::size_t> leaf_order(const Dendrogram& d) {
  const std::size_t m = d.leaves;
  std::vector<std::size_t> order;
  order.reserve(m);
  if (m == 1) return {0};
  std::vector<int> stack{d.root()};
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    if (static_cast<std::size_t>(n) < m) {
      order.push_back(static_cast<std::size_t>(n));
      continue;
    }
    const auto& mg = d.merges[static_cast<std::size_t>(n) - m];
    stack.push_back(mg.right);
    stack.push_back(mg.left);
  }
  return order;
}

/// Leaf ids under each node, in left-to-right order.
inline std::vector<std::vector<std::size_t>> node_leaves(const Dendrogram& d) {
  const std::size_t m = d.leaves;
  std::vector<std::vector<std::size_t>> out(2 * m - 1);
  for (std::size_t i = 0; i < m; ++i) out[i] = {i};
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    auto& v = out[m + k];
    const auto& l = out[static_cast<std::size_t>(d.merges[k].left)];
    const auto& r = out[static_cast<std::size_t>(d.merges[k].right)];
    v.reserve(l.size() + r.size());
    v.insert(v.end(), l.begin(), l.end());
    v.insert(v.end(), r.begin(), r.end());
  }
  return out;
}

/// Flat clustering with k clusters: undo the last k-1 merges. Cluster ids
/// are numbered by first appearance in leaf index order.
inline std::vector<int> cut_tree(const Dendrogram& d, std::size_t k) {
  const std::size_t m = d.leaves;
  if (k < 1 || k > m) throw ConfigError("cut_tree: k must lie in [1, M]");
  std::vector<int> parent(2 * m - 1, -1);
  for (std::size_t s = 0; s < m - k; ++s) {
    parent[static_cast<std::size_t>(d.merges[s].left)] = static_cast<int>(m + s);
    parent[static_cast<std::size_t>(d.merges[s].right)] = static_cast<int>(m + s);
  }
  std::vector<int> label(m, -1);
  std::vector<int> root_label(2 * m - 1, -1);
  int next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    auto r = static_cast<int>(i);
    while (parent[static_cast<std::size_t>(r)] >= 0) r = parent[static_cast<std::size_t>(r)];
    auto& lab = root_label[static_cast<std::size_t>(r)];
    if (lab < 0) lab = next++;
    label[i] = lab;
  }
  return label;
}

inline nlohmann::json dendrogram_to_json(const Dendrogram& d) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& mg : d.merges)
    merges.push_back({{"left", mg.left}, {"right", mg.right}, {"height", mg.height}, {"size", mg.size}});
  return {{"M", d.leaves}, {"linkage", to_string(d.kind)}, {"merges", std::move(merges)}};
}

inline Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  Dendrogram d;
  try {
    d.leaves = j.at("M").get<std::size_t>();
    d.kind = linkage_kind_from_string(j.at("linkage").get<std::string>());
    for (const auto& mg : j.at("merges"))
      d.merges.push_back({mg.at("left").get<int>(), mg.at("right").get<int>(),
                          mg.at("height").get<double>(), mg.at("size").get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dendrogram: ") + e.what());
  }
  validate(d);
  return d;
}

inline void save_dendrogram(const Dendrogram& d, const std::string& path) {
  xmurf::detail::write_file(path, dendrogram_to_json(d).dump(1) + "\n");
}

}  // namespace xmurf::ordering
