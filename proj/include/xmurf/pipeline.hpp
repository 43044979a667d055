#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "classify/thresholds.hpp"
#include "core/dataset.hpp"
#include "core/random.hpp"
#include "forest/proximity.hpp"
#include "forest/unsupervised_forest.hpp"
#include "ordering/heatmap.hpp"
#include "ordering/linkage.hpp"
#include "ordering/optimal_leaf_order.hpp"
#include "ordering/seriation.hpp"
#include "scenario/features.hpp"
#include "sim/simulation.hpp"
#include "sim/trace_io.hpp"

namespace xmurf::pipeline {

/// A stage produced nothing to work on (e.g. no scenario in any trace).
class EmptyResultError : public Error {
 public:
  using Error::Error;
};

enum ExitCode : int { kOk = 0, kConfigFailure = 2, kEmptyResult = 3 };

struct PipelineConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string work_dir = ".";

  sim::RoadConfig road;
  struct {
    double dt = 0.05;
    double duration = 60.0;
    std::size_t runs = 5;
    std::optional<std::uint64_t> seed;
    double retarget_interval = 30.0;
    std::vector<int> lane_counts;  // per run, cycled; empty = road.lanes
  } sim;
  struct {
    std::size_t trees = 300;
    std::optional<std::uint64_t> seed;
  } xmurf;
  struct {
    ordering::LinkageKind linkage = ordering::LinkageKind::average;
    bool optimal_leaf_order = false;
  } ordering;
  struct {
    std::size_t trees = 300;
    double ratio = 1.0;
    std::optional<std::uint64_t> seed;
  } classify;
  std::map<std::string, std::string> paths;  // overrides of default_paths()

  std::uint64_t sim_seed() const { return sim.seed.value_or(derive_seed(seed, "sim")); }
  std::uint64_t xmurf_seed() const { return xmurf.seed.value_or(derive_seed(seed, "xmurf")); }
  std::uint64_t classify_seed() const { return classify.seed.value_or(derive_seed(seed, "clf")); }

  sim::RoadConfig road_for_run(std::size_t k) const {
    auto r = road;
    if (!sim.lane_counts.empty()) r.lanes = sim.lane_counts[k % sim.lane_counts.size()];
    return r;
  }

  void validate() const {
    road.validate();
    for (std::size_t k = 0; k < std::max<std::size_t>(1, sim.lane_counts.size()); ++k) road_for_run(k).validate();
    sim::SimParams p{sim.dt, sim.duration, 0, sim.retarget_interval};
    p.validate();
    if (xmurf.trees < 1) throw ConfigError("xmurf.B must be >= 1");
    if (classify.trees < 1) throw ConfigError("classify.B must be >= 1");
    if (!(classify.ratio >= 0.0)) throw ConfigError("classify.ratio must be >= 0");
  }
};

/// File names relative to the work directory.
inline const std::map<std::string, std::string>& default_paths() {
  static const std::map<std::string, std::string> p = {
      {"traces", "traces"},
      {"scenarios", "scenarios.csv"},
      {"scenario_meta", "scenarios.json"},
      {"proximity", "proximity.bin"},
      {"proximity_csv", "proximity.csv"},
      {"forest", "forest.json"},
      {"ordered", "ordered.bin"},
      {"heatmap", "heatmap.ppm"},
      {"dendrogram", "dendrogram.json"},
      {"permutation", "permutation.json"},
      {"ranges", "ranges.json"},
      {"labeled", "labeled.csv"},
      {"model", "model.json"},
      {"input", "scenarios.csv"},
      {"predictions", "predictions.csv"},
  };
  return p;
}

inline std::string path_of(const PipelineConfig& c, const std::string& key) {
  const auto it = c.paths.find(key);
  const std::string rel = it != c.paths.end() ? it->second : default_paths().at(key);
  const std::filesystem::path p(rel);
  return (p.is_absolute() ? p : std::filesystem::path(c.work_dir) / p).string();
}

inline std::string trace_path(const PipelineConfig& c, std::size_t k) {
  return (std::filesystem::path(path_of(c, "traces")) / ("trace_" + std::to_string(k) + ".jsonl")).string();
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> keys,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto allowed : keys) ok = ok || k == allowed;
    if (!ok) throw ConfigError("unknown config key '" + where + "." + k + "'");
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

/// JSON config:
///   {seed, threads, work_dir,
///    road: {lanes, lane_width, max_per_lane, speed_limit, max_leader_gap},
///    sim: {dt, duration, runs, seed, retarget_interval, lane_counts},
///    xmurf: {B, seed}, ordering: {linkage, optimal_leaf_order},
///    classify: {B, ratio, seed}, paths: {name: path}}
/// Every key is optional; unknown keys are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  PipelineConfig c;
  try {
    detail::reject_unknown(j, {"seed", "threads", "work_dir", "road", "sim", "xmurf", "ordering", "classify", "paths"},
                           "config");
    read_opt(j, "seed", c.seed);
    read_opt(j, "threads", c.threads);
    read_opt(j, "work_dir", c.work_dir);
    if (j.contains("road")) {
      const auto& r = j.at("road");
      detail::reject_unknown(r, {"lanes", "lane_width", "max_per_lane", "speed_limit", "max_leader_gap"}, "road");
      read_opt(r, "lanes", c.road.lanes);
      read_opt(r, "lane_width", c.road.lane_width);
      read_opt(r, "max_per_lane", c.road.max_per_lane);
      read_opt(r, "speed_limit", c.road.speed_limit);
      read_opt(r, "max_leader_gap", c.road.max_leader_gap);
    }
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      detail::reject_unknown(s, {"dt", "duration", "runs", "seed", "retarget_interval", "lane_counts"}, "sim");
      read_opt(s, "dt", c.sim.dt);
      read_opt(s, "duration", c.sim.duration);
      read_opt(s, "runs", c.sim.runs);
      if (s.contains("seed")) c.sim.seed = s.at("seed").get<std::uint64_t>();
      read_opt(s, "retarget_interval", c.sim.retarget_interval);
      read_opt(s, "lane_counts", c.sim.lane_counts);
    }
    if (j.contains("xmurf")) {
      const auto& x = j.at("xmurf");
      detail::reject_unknown(x, {"B", "seed"}, "xmurf");
      read_opt(x, "B", c.xmurf.trees);
      if (x.contains("seed")) c.xmurf.seed = x.at("seed").get<std::uint64_t>();
    }
    if (j.contains("ordering")) {
      const auto& o = j.at("ordering");
      detail::reject_unknown(o, {"linkage", "optimal_leaf_order"}, "ordering");
      if (o.contains("linkage")) c.ordering.linkage = ordering::linkage_kind_from_string(o.at("linkage").get<std::string>());
      read_opt(o, "optimal_leaf_order", c.ordering.optimal_leaf_order);
    }
    if (j.contains("classify")) {
      const auto& k = j.at("classify");
      detail::reject_unknown(k, {"B", "ratio", "seed"}, "classify");
      read_opt(k, "B", c.classify.trees);
      read_opt(k, "ratio", c.classify.ratio);
      if (k.contains("seed")) c.classify.seed = k.at("seed").get<std::uint64_t>();
    }
    if (j.contains("paths")) {
      for (const auto& [k, v] : j.at("paths").items()) {
        if (!default_paths().contains(k)) throw ConfigError("unknown path key '" + k + "'");
        c.paths[k] = v.get<std::string>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void ensure_parent(const std::string& file) {
  const auto parent = std::filesystem::path(file).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

/// One trace per run, seeded derive_seed(sim seed, k).
inline void cmd_simulate(const PipelineConfig& c, std::ostream& log) {
  c.validate();
  if (c.sim.runs < 1) throw ConfigError("sim.runs must be >= 1");
  std::filesystem::create_directories(path_of(c, "traces"));
  for (std::size_t k = 0; k < c.sim.runs; ++k) {
    sim::SimParams p{c.sim.dt, c.sim.duration, derive_seed(c.sim_seed(), static_cast<std::uint64_t>(k)),
                     c.sim.retarget_interval};
    const auto trace = sim::run_simulation(c.road_for_run(k), p);
    sim::save_trace(trace, trace_path(c, k));
    log << "run " << k << ": " << trace.vehicles() << " vehicles, " << trace.collisions.size()
        << " collisions, " << trace.lane_changes.size() << " lane changes\n";
  }
}

/// Reads trace_0.jsonl, trace_1.jsonl, ... up to the first missing index.
inline void cmd_extract(const PipelineConfig& c, std::ostream& log) {
  Dataset data;
  data.feature_names = scenario::feature_names();
  nlohmann::json meta = nlohmann::json::array();
  std::size_t k = 0;
  for (; std::filesystem::exists(trace_path(c, k)); ++k) {
    const auto trace = sim::load_trace(trace_path(c, k));
    for (const auto& sc : scenario::detect_scenarios(trace)) {
      const std::string id = "r" + std::to_string(k) + "_e" + std::to_string(sc.ego) + "_t" + std::to_string(sc.t_start);
      data.append(id, scenario::extract_features(sc, trace));
      auto m = scenario::scenario_metadata(id, sc);
      m["run"] = k;
      meta.push_back(std::move(m));
    }
  }
  if (k == 0) throw EmptyResultError("no trace files in '" + path_of(c, "traces") + "'");
  if (data.rows() == 0) throw EmptyResultError("no scenarios found in " + std::to_string(k) + " trace(s)");
  ensure_parent(path_of(c, "scenarios"));
  save_dataset(data, path_of(c, "scenarios"));
  xmurf::detail::write_file(path_of(c, "scenario_meta"), meta.dump(1) + "\n");
  log << data.rows() << " scenarios from " << k << " trace(s)\n";
}

inline void cmd_cluster(const PipelineConfig& c, std::ostream& log) {
  const auto data = load_dataset(path_of(c, "scenarios"));
  if (data.rows() < 2) throw ConfigError("clustering needs at least 2 scenarios, got " + std::to_string(data.rows()));
  const auto f = forest::fit(data, c.xmurf.trees, c.xmurf_seed(), c.threads);
  const auto p = forest::proximity_matrix(f, data, c.threads);
  validate(p);
  save_matrix(p, path_of(c, "proximity"), MatrixFormat::raw);
  save_matrix(p, path_of(c, "proximity_csv"), MatrixFormat::csv);
  forest::save_forest(f, path_of(c, "forest"));
  log << "proximity matrix " << p.size() << " x " << p.size() << " from " << f.trees.size() << " trees\n";
}

inline void cmd_order(const PipelineConfig& c, std::ostream& log) {
  const auto p = load_matrix(path_of(c, "proximity"), MatrixFormat::raw);
  const auto d = ordering::linkage(p, c.ordering.linkage);
  const auto perm = c.ordering.optimal_leaf_order ? ordering::optimal_leaf_order(d, p) : ordering::leaf_order(d);
  const auto ordered = ordering::reorder(p, perm);
  save_matrix(ordered, path_of(c, "ordered"), MatrixFormat::raw);
  ordering::render_heatmap(ordered, path_of(c, "heatmap"));
  ordering::save_dendrogram(d, path_of(c, "dendrogram"));
  ordering::save_permutation(perm, ordered.ids, path_of(c, "permutation"));
  log << "seriated " << p.size() << " rows, mean adjacent similarity "
      << ordering::mean_adjacent_similarity(p, perm) << "\n";
}

/// Heatmap of the seriated matrix; with a ranges file present, also the
/// per-block mean similarity to help pick clusters.
inline void cmd_render(const PipelineConfig& c, std::ostream& log) {
  const auto ordered = load_matrix(path_of(c, "ordered"), MatrixFormat::raw);
  ordering::render_heatmap(ordered, path_of(c, "heatmap"));
  log << "wrote " << path_of(c, "heatmap") << " (" << ordered.size() << " x " << ordered.size() << ")\n";
  if (std::filesystem::exists(path_of(c, "ranges")))
    log << ordering::describe_blocks(ordered, ordering::load_cluster_ranges(path_of(c, "ranges")));
}

inline void cmd_label(const PipelineConfig& c, std::ostream& log) {
  const auto data = load_dataset(path_of(c, "scenarios"));
  const auto perm = ordering::load_permutation(path_of(c, "permutation"));
  const auto ranges = ordering::load_cluster_ranges(path_of(c, "ranges"));
  const auto labeled = ordering::apply_cluster_ranges(data, perm, ranges);
  save_labeled_dataset(labeled, path_of(c, "labeled"));
  log << labeled.rows() << " of " << data.rows() << " scenarios labeled\n";
}

inline void cmd_train(const PipelineConfig& c, std::ostream& log) {
  const auto labeled = load_labeled_dataset(path_of(c, "labeled"));
  const auto f = classify::fit_classifier(labeled, c.classify.trees, c.classify_seed(), c.threads);
  const auto th = classify::oob_thresholds(f, labeled);
  classify::save_model(f, th, path_of(c, "model"));
  for (const auto& [label, k] : th.kappa_bar) log << "kappa_bar[" << label << "] = " << k << "\n";
}

inline void cmd_classify(const PipelineConfig& c, std::ostream& log) {
  const auto [f, th] = classify::load_model(path_of(c, "model"));
  const auto data = load_dataset(path_of(c, "input"));
  const auto preds = classify::predict_all(f, th, data, c.classify.ratio, c.threads);
  classify::save_predictions(data, preds, path_of(c, "predictions"));
  const auto assigned = std::count_if(preds.begin(), preds.end(), [](const auto& p) { return p.label.has_value(); });
  log << assigned << " of " << preds.size() << " assigned at ratio " << c.classify.ratio << "\n";
}

}  // namespace xmurf::pipeline
