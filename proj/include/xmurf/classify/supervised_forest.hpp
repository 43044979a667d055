#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "../core/dataset.hpp"
#include "../core/parallel.hpp"
#include "../core/random.hpp"
#include "../forest/unsupervised_forest.hpp"

namespace xmurf::classify {

struct ClassNode {
  int id = 0;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int real_count = 0;
  std::vector<int> class_counts;  // leaves only

  bool is_leaf() const noexcept { return left < 0; }
  bool operator==(const ClassNode&) const = default;
};

struct ClassTree {
  std::vector<ClassNode> nodes;
  std::vector<std::size_t> bag;

  const ClassNode& leaf(std::span<const double> x) const {
    const ClassNode* n = &nodes.front();
    while (!n->is_leaf())
      n = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left
                                                                                                 : n->right)];
    return *n;
  }

  /// Majority class of the reached leaf; ties go to the lowest class index.
  std::size_t vote(std::span<const double> x) const {
    const auto& c = leaf(x).class_counts;
    return static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
  }

  bool operator==(const ClassTree&) const = default;
};

struct SupervisedForest {
  std::vector<ClassTree> trees;
  std::vector<std::string> labels;  // class index -> label, sorted
  std::size_t num_features = 0;
  std::vector<std::string> feature_names;
  std::uint64_t seed = 0;

  bool operator==(const SupervisedForest&) const = default;
};

namespace detail {

// Split score sum_c n_cl^2 / n_l + sum_c n_cr^2 / n_r; larger means lower
// weighted Gini. The integer sums make it independent of class numbering.
inline double split_score(long long sq_left, long long n_left, long long sq_right, long long n_right) {
  return static_cast<double>(sq_left) / static_cast<double>(n_left) +
         static_cast<double>(sq_right) / static_cast<double>(n_right);
}

struct ClassSplit {
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = 0.0;
};

inline ClassTree grow_class_tree(const Dataset& data, const std::vector<std::size_t>& y,
                                 std::size_t n_classes, std::uint64_t tree_seed) {
  Rng rng(tree_seed);
  const std::size_t m = data.rows();
  const std::size_t q = data.cols();
  const std::size_t q_split = forest::features_per_split(q);
  ClassTree tree;
  tree.bag.resize(m);
  for (auto& r : tree.bag) r = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);

  struct Pending {
    int id;
    std::vector<std::size_t> rows;
  };
  std::deque<Pending> queue;
  tree.nodes.push_back({});
  queue.push_back({0, tree.bag});
  std::vector<std::size_t> order(q);
  std::vector<std::pair<double, std::size_t>> vals;
  std::vector<long long> left_counts(n_classes), total(n_classes);
  while (!queue.empty()) {
    Pending cur = std::move(queue.front());
    queue.pop_front();
    auto& node = tree.nodes[static_cast<std::size_t>(cur.id)];
    node.id = cur.id;
    node.real_count = static_cast<int>(cur.rows.size());
    std::fill(total.begin(), total.end(), 0);
    for (auto r : cur.rows) ++total[y[r]];
    const bool pure = std::count_if(total.begin(), total.end(), [](long long c) { return c > 0; }) <= 1;

    std::optional<ClassSplit> best;
    if (!pure) {
      // Visit features in random order until q_split non-constant ones were scored.
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t scored = 0;
      for (std::size_t f = 0; f < q && scored < q_split; ++f) {
        const std::size_t feat = order[f];
        vals.clear();
        for (auto r : cur.rows) vals.emplace_back(data.at(r, feat), y[r]);
        std::sort(vals.begin(), vals.end());
        if (!(vals.back().first > vals.front().first)) continue;
        ++scored;
        std::fill(left_counts.begin(), left_counts.end(), 0);
        long long sq_left = 0;
        long long sq_right = 0;
        for (auto c : total) sq_right += c * c;
        const auto n = static_cast<long long>(vals.size());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
          const std::size_t c = vals[k].second;
          const long long l = left_counts[c]++;
          const long long r = total[c] - l;
          sq_left += 2 * l + 1;
          sq_right -= 2 * r - 1;
          if (!(vals[k].first < vals[k + 1].first)) continue;
          const auto nl = static_cast<long long>(k + 1);
          const double score = split_score(sq_left, nl, sq_right, n - nl);
          const double tau = forest::midpoint_threshold(vals[k].first, vals[k + 1].first);
          if (!best || score > best->score ||
              (score == best->score && (feat < best->feature || (feat == best->feature && tau < best->threshold))))
            best = ClassSplit{feat, tau, score};
        }
      }
    }
    if (!best) {
      tree.nodes[static_cast<std::size_t>(cur.id)].class_counts.assign(total.begin(), total.end());
      continue;
    }
    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : cur.rows) (data.at(r, best->feature) <= best->threshold ? left_rows : right_rows).push_back(r);
    const int left_id = static_cast<int>(tree.nodes.size());
    {
      auto& n = tree.nodes[static_cast<std::size_t>(cur.id)];
      n.feature = static_cast<int>(best->feature);
      n.threshold = best->threshold;
      n.left = left_id;
      n.right = left_id + 1;
    }
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    queue.push_back({left_id, std::move(left_rows)});
    queue.push_back({left_id + 1, std::move(right_rows)});
  }
  return tree;
}

}  // namespace detail

/// Class index of every row of `d` against the sorted label set.
inline std::vector<std::size_t> encode_labels(const LabeledDataset& d, const std::vector<std::string>& labels) {
  std::vector<std::size_t> y(d.labels.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto it = std::lower_bound(labels.begin(), labels.end(), d.labels[i]);
    if (it == labels.end() || *it != d.labels[i])
      throw ConfigError("label '" + d.labels[i] + "' unknown to the model");
    y[i] = static_cast<std::size_t>(it - labels.begin());
  }
  return y;
}

/// Random forest of fully grown CART trees (Gini) on bootstrap bags; tree b
/// is seeded from derive_seed(seed, b). Leaves are pure unless their points
/// coincide in every feature.
inline SupervisedForest fit_classifier(const LabeledDataset& d, std::size_t num_trees, std::uint64_t seed,
                                       unsigned threads = 1) {
  validate(d.base);
  if (d.labels.size() != d.rows()) throw InvariantError("label count does not match row count");
  if (d.base.cols() < 1) throw ConfigError("classifier needs at least 1 feature");
  if (num_trees < 1) throw ConfigError("classifier needs at least 1 tree");
  SupervisedForest f;
  f.labels = d.label_set();
  if (f.labels.size() < 2)
    throw ConfigError("single-class input: the classifier needs at least 2 classes");
  const auto y = encode_labels(d, f.labels);
  std::vector<std::size_t> count(f.labels.size(), 0);
  for (auto c : y) ++count[c];
  for (std::size_t c = 0; c < count.size(); ++c)
    if (count[c] < 2) throw ConfigError("class '" + f.labels[c] + "' has fewer than 2 datapoints");

  f.num_features = d.base.cols();
  f.feature_names = d.base.feature_names;
  f.seed = seed;
  f.trees.resize(num_trees);
  parallel_for(num_trees, threads, [&](std::size_t b) {
    f.trees[b] = detail::grow_class_tree(d.base, y, f.labels.size(), derive_seed(seed, static_cast<std::uint64_t>(b)));
  });
  return f;
}

/// Votes per class over all trees.
inline std::vector<std::size_t> votes(const SupervisedForest& f, std::span<const double> x) {
  if (x.size() != f.num_features) throw ConfigError("feature vector length does not match the model");
  std::vector<std::size_t> v(f.labels.size(), 0);
  for (const auto& t : f.trees) ++v[t.vote(x)];
  return v;
}

/// Plurality class index (ties to the lowest) and its vote fraction.
inline std::pair<std::size_t, double> plurality(const SupervisedForest& f, std::span<const double> x) {
  const auto v = votes(f, x);
  const auto c = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  return {c, static_cast<double>(v[c]) / static_cast<double>(f.trees.size())};
}

inline nlohmann::json class_tree_to_json(const ClassTree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    nlohmann::json j{{"id", n.id}, {"real_count", n.real_count}};
    if (n.is_leaf()) {
      j["feature"] = nullptr;
      j["threshold"] = nullptr;
      j["left"] = nullptr;
      j["right"] = nullptr;
      j["class_counts"] = n.class_counts;
    } else {
      j["feature"] = n.feature;
      j["threshold"] = n.threshold;
      j["left"] = n.left;
      j["right"] = n.right;
      j["class_counts"] = nullptr;
    }
    nodes.push_back(std::move(j));
  }
  return {{"bag", t.bag}, {"nodes", std::move(nodes)}};
}

inline ClassTree class_tree_from_json(const nlohmann::json& j, std::size_t n_classes, std::size_t q) {
  ClassTree t;
  t.bag = j.at("bag").get<std::vector<std::size_t>>();
  for (const auto& jn : j.at("nodes")) {
    ClassNode n;
    n.id = jn.at("id").get<int>();
    n.real_count = jn.at("real_count").get<int>();
    if (!jn.at("left").is_null()) {
      n.feature = jn.at("feature").get<int>();
      n.threshold = jn.at("threshold").get<double>();
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
    } else {
      n.class_counts = jn.at("class_counts").get<std::vector<int>>();
    }
    t.nodes.push_back(std::move(n));
  }
  const auto size = static_cast<int>(t.nodes.size());
  if (size == 0) throw ParseError("model tree without nodes");
  for (int k = 0; k < size; ++k) {
    const auto& n = t.nodes[static_cast<std::size_t>(k)];
    if (n.id != k) throw ParseError("model node ids must be 0..n-1 in order");
    if (n.is_leaf()) {
      if (n.class_counts.size() != n_classes) throw ParseError("leaf class_counts has the wrong length");
    } else if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= q || n.left <= k || n.right <= k ||
               n.left >= size || n.right >= size) {
      throw ParseError("model node " + std::to_string(k) + " has an invalid split");
    }
  }
  return t;
}

}  // namespace xmurf::classify
