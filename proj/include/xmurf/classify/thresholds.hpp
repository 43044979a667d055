#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "supervised_forest.hpp"

namespace xmurf::classify {

inline constexpr std::string_view kUnassigned = "UNASSIGNED";

struct ClassThresholds {
  std::map<std::string, double> kappa_bar;
  std::vector<std::string> ids;              // rows the kappas refer to
  std::vector<std::optional<double>> kappa;  // empty when the row was never out of bag
  std::vector<std::string> excluded;         // ids with no OOB tree

  bool operator==(const ClassThresholds&) const = default;
};

/// Whether row i was left out of the bag of tree t.
inline bool out_of_bag(const ClassTree& t, std::size_t i) {
  return std::find(t.bag.begin(), t.bag.end(), i) == t.bag.end();
}

/// kappa_i = share of OOB trees voting for the true class of row i;
/// kappa_bar_c = mean kappa_i over class c. `d` must be the training set in
/// training row order, since the bags index its rows.
inline ClassThresholds oob_thresholds(const SupervisedForest& f, const LabeledDataset& d) {
  const std::size_t m = d.rows();
  for (const auto& t : f.trees)
    for (auto r : t.bag)
      if (r >= m) throw ConfigError("oob_thresholds: dataset is not the training set (bag index out of range)");
  const auto y = encode_labels(d, f.labels);
  std::vector<std::vector<char>> in_bag(f.trees.size(), std::vector<char>(m, 0));
  for (std::size_t b = 0; b < f.trees.size(); ++b)
    for (auto r : f.trees[b].bag) in_bag[b][r] = 1;

  ClassThresholds th;
  th.ids = d.base.ids;
  th.kappa.resize(m);
  std::vector<double> sum(f.labels.size(), 0.0);
  std::vector<std::size_t> n(f.labels.size(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t oob = 0, correct = 0;
    for (std::size_t b = 0; b < f.trees.size(); ++b) {
      if (in_bag[b][i]) continue;
      ++oob;
      if (f.trees[b].vote(d.base.row(i)) == y[i]) ++correct;
    }
    if (oob == 0) {
      th.excluded.push_back(d.base.ids[i]);
      continue;
    }
    const double k = static_cast<double>(correct) / static_cast<double>(oob);
    th.kappa[i] = k;
    sum[y[i]] += k;
    ++n[y[i]];
  }
  if (!th.excluded.empty())
    warn("oob_thresholds: " + std::to_string(th.excluded.size()) +
         " datapoint(s) were never out of bag and are excluded from the class thresholds");
  for (std::size_t c = 0; c < f.labels.size(); ++c) {
    if (n[c] == 0) throw ConfigError("class '" + f.labels[c] + "' has no out-of-bag datapoint");
    th.kappa_bar[f.labels[c]] = sum[c] / static_cast<double>(n[c]);
  }
  return th;
}

struct Prediction {
  std::optional<std::string> label;  // empty when withdrawn
  std::string plurality;
  double vote_fraction = 0.0;
  double threshold = 0.0;  // ratio * kappa_bar of the plurality class

  bool operator==(const Prediction&) const = default;
};

/// Plurality class over all trees, withdrawn when its vote fraction is below
/// ratio * kappa_bar of that class.
inline Prediction predict_with_threshold(const SupervisedForest& f, const ClassThresholds& th,
                                         std::span<const double> x, double ratio) {
  if (!(ratio >= 0.0)) throw ConfigError("ratio must be >= 0");
  const auto [c, v] = plurality(f, x);
  Prediction p;
  p.plurality = f.labels[c];
  p.vote_fraction = v;
  const auto it = th.kappa_bar.find(p.plurality);
  if (it == th.kappa_bar.end()) throw ConfigError("no threshold for class '" + p.plurality + "'");
  p.threshold = ratio * it->second;
  if (v >= p.threshold) p.label = p.plurality;
  return p;
}

inline std::vector<Prediction> predict_all(const SupervisedForest& f, const ClassThresholds& th,
                                           const Dataset& data, double ratio, unsigned threads = 1) {
  if (data.cols() != f.num_features)
    throw ConfigError("dataset has " + std::to_string(data.cols()) + " features, model expects " +
                      std::to_string(f.num_features));
  std::vector<Prediction> out(data.rows());
  parallel_for(data.rows(), threads,
               [&](std::size_t i) { out[i] = predict_with_threshold(f, th, data.row(i), ratio); });
  return out;
}

inline double assignment_rate(const SupervisedForest& f, const ClassThresholds& th, const Dataset& data,
                              double ratio, unsigned threads = 1) {
  if (data.rows() == 0) return 0.0;
  const auto preds = predict_all(f, th, data, ratio, threads);
  const auto assigned = std::count_if(preds.begin(), preds.end(), [](const Prediction& p) { return p.label.has_value(); });
  return static_cast<double>(assigned) / static_cast<double>(data.rows());
}

/// id,label,vote_fraction,threshold_used
inline void save_predictions(const Dataset& data, const std::vector<Prediction>& preds, const std::string& path) {
  std::string out = "id,label,vote_fraction,threshold_used\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out += data.ids[i];
    out += ',';
    out += preds[i].label ? *preds[i].label : std::string(kUnassigned);
    out += ',' + xmurf::detail::format_double(preds[i].vote_fraction);
    out += ',' + xmurf::detail::format_double(preds[i].threshold) + '\n';
  }
  xmurf::detail::write_file(path, out);
}

// Model file: forest, class labels and the OOB thresholds in one JSON object.

inline nlohmann::json model_to_json(const SupervisedForest& f, const ClassThresholds& th) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : f.trees) trees.push_back(class_tree_to_json(t));
  nlohmann::json kappa = nlohmann::json::array();
  for (const auto& k : th.kappa) kappa.push_back(k ? nlohmann::json(*k) : nlohmann::json(nullptr));
  return {{"seed", f.seed},
          {"B", f.trees.size()},
          {"Q", f.num_features},
          {"feature_names", f.feature_names},
          {"labels", f.labels},
          {"kappa_bar", th.kappa_bar},
          {"kappa", {{"ids", th.ids}, {"values", std::move(kappa)}}},
          {"excluded", th.excluded},
          {"trees", std::move(trees)}};
}

inline std::pair<SupervisedForest, ClassThresholds> model_from_json(const nlohmann::json& j) {
  SupervisedForest f;
  ClassThresholds th;
  try {
    f.seed = j.at("seed").get<std::uint64_t>();
    f.num_features = j.at("Q").get<std::size_t>();
    f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    f.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& t : j.at("trees")) f.trees.push_back(class_tree_from_json(t, f.labels.size(), f.num_features));
    if (f.trees.size() != j.at("B").get<std::size_t>()) throw ParseError("model B does not match tree count");
    th.kappa_bar = j.at("kappa_bar").get<std::map<std::string, double>>();
    th.ids = j.at("kappa").at("ids").get<std::vector<std::string>>();
    for (const auto& k : j.at("kappa").at("values"))
      th.kappa.push_back(k.is_null() ? std::nullopt : std::optional<double>(k.get<double>()));
    th.excluded = j.at("excluded").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  if (!std::is_sorted(f.labels.begin(), f.labels.end())) throw ParseError("model labels must be sorted");
  for (const auto& l : f.labels)
    if (!th.kappa_bar.contains(l)) throw ParseError("model has no threshold for class '" + l + "'");
  return {std::move(f), std::move(th)};
}

inline void save_model(const SupervisedForest& f, const ClassThresholds& th, const std::string& path) {
  xmurf::detail::write_file(path, model_to_json(f, th).dump() + "\n");
}

inline std::pair<SupervisedForest, ClassThresholds> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace xmurf::classify
