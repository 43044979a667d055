#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "../core/dataset.hpp"
#include "../core/parallel.hpp"
#include "../core/random.hpp"
#include "noise.hpp"

namespace xmurf::forest {

/// Node of a binary tree. Leaves carry no split fields.
struct TreeNode {
  int id = 0;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int real_count = 0;  // bagged real points reaching the node
  std::optional<NoiseKind> noise_kind;

  bool is_leaf() const noexcept { return left < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Nodes are stored so that nodes[k].id == k; the root is node 0.
struct Tree {
  std::vector<TreeNode> nodes;
  int root = 0;
  std::vector<std::size_t> bag;  // bootstrap row indices, with repetitions

  /// Leaf reached by x: go left iff x[feature] <= threshold.
  int leaf_of(std::span<const double> x) const {
    int n = root;
    while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
      const auto& node = nodes[static_cast<std::size_t>(n)];
      n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return n;
  }

  bool operator==(const Tree&) const = default;
};

struct Forest {
  std::vector<Tree> trees;
  std::size_t num_features = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;

  bool operator==(const Forest&) const = default;
};

/// Features sampled per split: floor(sqrt(Q)), at least 1.
inline std::size_t features_per_split(std::size_t q) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(q)))));
}

/// Draws k distinct indices from [0, q) (partial Fisher-Yates), sorted ascending.
inline std::vector<std::size_t> sample_features(std::size_t q, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(q);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(i, q - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Midpoint of two consecutive distinct sorted values, kept strictly below `hi`.
inline double midpoint_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Best split of the real points `rows` against virtual noise of `kind`.
/// Ties go to the lowest feature index, then the lowest threshold.
inline std::optional<SplitCandidate> best_unsupervised_split(const Dataset& data,
                                                             std::span<const std::size_t> rows,
                                                             std::span<const std::size_t> features,
                                                             NoiseKind kind) {
  const auto n = static_cast<double>(rows.size());
  const NodeCounts parent{n, n};
  std::optional<SplitCandidate> best;
  std::vector<double> values(rows.size());
  for (std::size_t q : features) {
    for (std::size_t k = 0; k < rows.size(); ++k) values[k] = data.at(rows[k], q);
    std::sort(values.begin(), values.end());
    const double lo = values.front();
    const double hi = values.back();
    if (!(hi > lo)) continue;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      if (!(values[k] < values[k + 1])) continue;
      const double tau = midpoint_threshold(values[k], values[k + 1]);
      const double p = noise_cdf(kind, standardize(tau, lo, hi));
      const auto [noise_left, noise_right] = estimate_noise_children(n, p);
      const auto real_left = static_cast<double>(k + 1);
      const double gain = gini_gain(parent, {real_left, noise_left}, {n - real_left, noise_right});
      if (!best || gain > best->gain) best = SplitCandidate{q, tau, gain};
    }
  }
  return best;
}

/// Grows one fully grown xMURF tree on a bootstrap bag of the data.
/// Stops when a node holds one real point or every sampled feature is
/// constant. Gini gain is never negative, and zero-gain splits (two points
/// around a symmetric noise CDF) are still taken.
inline Tree grow_unsupervised_tree(const Dataset& data, std::uint64_t tree_seed) {
  Rng rng(tree_seed);
  const std::size_t m = data.rows();
  const std::size_t q = data.cols();
  const std::size_t q_split = features_per_split(q);
  Tree tree;
  tree.bag.resize(m);
  for (auto& r : tree.bag) r = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);

  struct Pending {
    int id;
    std::vector<std::size_t> rows;
  };
  std::deque<Pending> queue;
  tree.nodes.push_back({});
  queue.push_back({0, tree.bag});
  while (!queue.empty()) {
    Pending cur = std::move(queue.front());
    queue.pop_front();
    auto& node = tree.nodes[static_cast<std::size_t>(cur.id)];
    node.id = cur.id;
    node.real_count = static_cast<int>(cur.rows.size());
    if (cur.rows.size() <= 1) continue;

    const auto kind = static_cast<NoiseKind>(
        std::uniform_int_distribution<int>(0, static_cast<int>(kNoiseKindCount) - 1)(rng));
    const auto features = sample_features(q, q_split, rng);
    const auto split = best_unsupervised_split(data, cur.rows, features, kind);
    if (!split) continue;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : cur.rows)
      (data.at(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
    const int left_id = static_cast<int>(tree.nodes.size());
    const int right_id = left_id + 1;
    {
      auto& n = tree.nodes[static_cast<std::size_t>(cur.id)];
      n.feature = static_cast<int>(split->feature);
      n.threshold = split->threshold;
      n.left = left_id;
      n.right = right_id;
      n.noise_kind = kind;
    }
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    queue.push_back({left_id, std::move(left_rows)});
    queue.push_back({right_id, std::move(right_rows)});
  }
  return tree;
}

/// Fits B trees; tree b is seeded from derive_seed(seed, b), so the forest
/// does not depend on the worker count.
inline Forest fit(const Dataset& data, std::size_t num_trees, std::uint64_t seed,
                  unsigned threads = 1) {
  if (data.rows() < 2) throw ConfigError("xmurf fit needs at least 2 rows");
  if (data.cols() < 1) throw ConfigError("xmurf fit needs at least 1 feature");
  if (num_trees < 1) throw ConfigError("xmurf fit needs at least 1 tree");
  validate(data);
  bool degenerate = true;
  for (std::size_t i = 1; i < data.rows() && degenerate; ++i)
    degenerate = std::equal(data.row(i).begin(), data.row(i).end(), data.row(0).begin());
  if (degenerate) warn("xmurf fit: all rows are identical; trees will be single nodes");

  Forest forest;
  forest.num_features = data.cols();
  forest.seed = seed;
  forest.feature_names = data.feature_names;
  forest.trees.resize(num_trees);
  parallel_for(num_trees, threads, [&](std::size_t b) {
    forest.trees[b] = grow_unsupervised_tree(data, derive_seed(seed, static_cast<std::uint64_t>(b)));
  });
  return forest;
}

// Serialization: {seed, B, Q, feature_names, trees: [{bag, nodes: [{id, feature,
// threshold, left, right, real_count, noise_kind}]}]}; leaf split fields are null.

inline nlohmann::json node_to_json(const TreeNode& n) {
  nlohmann::json j = {{"id", n.id}, {"real_count", n.real_count}};
  if (n.is_leaf()) {
    j["feature"] = nullptr;
    j["threshold"] = nullptr;
    j["left"] = nullptr;
    j["right"] = nullptr;
    j["noise_kind"] = nullptr;
  } else {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = n.left;
    j["right"] = n.right;
    j["noise_kind"] = n.noise_kind ? nlohmann::json(std::string(to_string(*n.noise_kind))) : nullptr;
  }
  return j;
}

inline TreeNode node_from_json(const nlohmann::json& j) {
  TreeNode n;
  n.id = j.at("id").get<int>();
  n.real_count = j.at("real_count").get<int>();
  if (!j.at("left").is_null()) {
    n.feature = j.at("feature").get<int>();
    n.threshold = j.at("threshold").get<double>();
    n.left = j.at("left").get<int>();
    n.right = j.at("right").get<int>();
    if (j.contains("noise_kind") && !j.at("noise_kind").is_null())
      n.noise_kind = noise_kind_from_string(j.at("noise_kind").get<std::string>());
  }
  return n;
}

/// Checks node ids, child links and split features of every tree.
inline void validate(const Forest& f) {
  if (f.trees.empty()) throw InvariantError("forest has no trees");
  for (const auto& t : f.trees) {
    if (t.nodes.empty()) throw InvariantError("tree has no nodes");
    std::vector<int> parents(t.nodes.size(), 0);
    for (std::size_t k = 0; k < t.nodes.size(); ++k) {
      const auto& n = t.nodes[k];
      if (n.id != static_cast<int>(k)) throw InvariantError("node ids must equal their position");
      if (n.is_leaf()) continue;
      if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= f.num_features)
        throw InvariantError("split feature out of range");
      for (int c : {n.left, n.right}) {
        if (c <= n.id || static_cast<std::size_t>(c) >= t.nodes.size())
          throw InvariantError("child ids must follow their parent and lie in range");
        ++parents[static_cast<std::size_t>(c)];
      }
    }
    for (std::size_t k = 1; k < t.nodes.size(); ++k)
      if (parents[k] != 1) throw InvariantError("tree is not a connected binary tree");
  }
}

inline nlohmann::json forest_to_json(const Forest& f) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : f.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) nodes.push_back(node_to_json(n));
    trees.push_back({{"bag", t.bag}, {"nodes", std::move(nodes)}});
  }
  return {{"seed", f.seed},
          {"B", f.trees.size()},
          {"Q", f.num_features},
          {"feature_names", f.feature_names},
          {"trees", std::move(trees)}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
  Forest f;
  try {
    f.seed = j.at("seed").get<std::uint64_t>();
    f.num_features = j.at("Q").get<std::size_t>();
    f.feature_names = j.value("feature_names", std::vector<std::string>{});
    for (const auto& jt : j.at("trees")) {
      Tree t;
      t.bag = jt.value("bag", std::vector<std::size_t>{});
      for (const auto& jn : jt.at("nodes")) t.nodes.push_back(node_from_json(jn));
      f.trees.push_back(std::move(t));
    }
    if (j.at("B").get<std::size_t>() != f.trees.size())
      throw ParseError("forest B does not match the number of trees");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("forest json: ") + e.what());
  }
  validate(f);
  return f;
}

inline void save_forest(const Forest& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << forest_to_json(f).dump() << '\n';
}

inline Forest load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  return forest_from_json(j);
}

}  // namespace xmurf::forest
