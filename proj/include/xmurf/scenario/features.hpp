#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "../core/dataset.hpp"
#include "detect.hpp"
#include "dtw.hpp"
#include "zones.hpp"

namespace xmurf::scenario {

// Canonical feature layout (Q = 47). Instants are scenario start, THW
// changepoint and scenario end.
//   [ 0..17] zone distances, index 6 * instant + zone
//   [18..35] zone relative velocities, index 18 + 6 * instant + zone
//   [36] thw_min        [37] duration_s      [38] dtw_gap
//   [39..41] ego lane at the three instants  [42] n_lanes
//   [43] ego lane changes  [44] cut_in  [45] collision  [46] v_ego_cp
inline constexpr std::size_t kFeatureCount = 47;
inline constexpr std::array<std::string_view, 3> kInstantNames = {"start", "cp", "end"};
inline constexpr double kDesiredHeadway = 1.8;  // s, desired gap = v_ego * 1.8 s

inline std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  names.reserve(kFeatureCount);
  for (auto kind : {"dist", "relvel"})
    for (auto instant : kInstantNames)
      for (auto zone : kZoneNames)
        names.push_back(std::string(kind) + "_" + std::string(zone) + "_" + std::string(instant));
  for (auto n : {"thw_min", "duration_s", "dtw_gap", "lane_start", "lane_cp", "lane_end", "n_lanes",
                 "lane_changes", "cut_in", "collision", "v_ego_cp"})
    names.emplace_back(n);
  return names;
}

/// Whether some vehicle moved into the ego lane ahead of the ego (within the
/// zone extent) during the scenario.
inline bool has_cut_in(const Scenario& sc, const sim::Trace& trace) {
  for (std::size_t t = std::max<std::size_t>(sc.t_start, 1); t <= sc.t_end; ++t) {
    const auto& now = trace.states[t];
    const auto& before = trace.states[t - 1];
    const auto& e = now[static_cast<std::size_t>(sc.ego)];
    const double extent = zone_extent(e.v);
    for (std::size_t j = 0; j < now.size(); ++j) {
      if (static_cast<int>(j) == sc.ego) continue;
      const double dx = now[j].x - e.x;
      if (now[j].lane == e.lane && before[j].lane != now[j].lane && dx >= 0.0 && dx <= extent)
        return true;
    }
  }
  return false;
}

/// The 47-value feature vector of one scenario. Pure in (scenario, trace).
inline FeatureVector extract_features(const Scenario& sc, const sim::Trace& trace) {
  FeatureVector f(kFeatureCount, 0.0);
  const std::array<std::size_t, 3> instants = {sc.t_start, sc.t_changepoint, sc.t_end};
  const auto ego = static_cast<std::size_t>(sc.ego);
  for (std::size_t k = 0; k < instants.size(); ++k) {
    const auto occ = assign_zones(trace, sc.ego, instants[k]);
    for (std::size_t z = 0; z < kZoneCount; ++z) {
      const auto& slot = occ.slots[z];
      f[6 * k + z] = slot ? slot->distance : occ.extent;
      f[18 + 6 * k + z] = slot ? slot->rel_velocity : 0.0;
    }
    f[39 + k] = trace.states[instants[k]][ego].lane;
  }
  f[36] = sc.thw_min;
  f[37] = sc.duration(trace.dt);

  std::vector<double> actual, desired;
  for (std::size_t t = sc.t_start; t <= sc.t_end; ++t) {
    const double want = trace.states[t][ego].v * kDesiredHeadway;
    desired.push_back(want);
    actual.push_back(leader_gap(trace, sc.ego, t).value_or(want));
  }
  f[38] = dtw_distance(actual, desired);

  f[42] = trace.road.lanes;
  int changes = 0;
  for (const auto& lc : trace.lane_changes)
    if (lc.vehicle == sc.ego && static_cast<std::size_t>(lc.step) > sc.t_start &&
        static_cast<std::size_t>(lc.step) <= sc.t_end)
      ++changes;
  f[43] = changes;
  f[44] = has_cut_in(sc, trace) ? 1.0 : 0.0;
  const int crash = trace.collision_step(sc.ego);
  f[45] = crash >= 0 && static_cast<std::size_t>(crash) >= sc.t_start &&
                  static_cast<std::size_t>(crash) <= sc.t_end
              ? 1.0
              : 0.0;
  f[46] = trace.states[sc.t_changepoint][ego].v;
  return f;
}

/// Sidecar record {id, ego_id, t_start, t_end, thw_min}.
inline nlohmann::json scenario_metadata(const std::string& id, const Scenario& sc) {
  return {{"id", id},
          {"ego_id", sc.ego},
          {"t_start", sc.t_start},
          {"t_end", sc.t_end},
          {"thw_min", sc.thw_min}};
}

}  // namespace xmurf::scenario
