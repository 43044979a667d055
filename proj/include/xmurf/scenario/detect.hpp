#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "../sim/vehicle.hpp"

namespace xmurf::scenario {

inline constexpr double kTriggerThw = 1.0;  // comfort zone left at THW <= 1.0 s
inline constexpr double kKeepThw = 0.8;     // scenario withdrawn unless THW_min <= 0.8 s
inline constexpr double kMergeGap = 1.0;    // windows of one ego closer than this are merged, s
inline constexpr double kMinThreatSpeed = 0.1;
inline constexpr double kNoThreat = std::numeric_limits<double>::infinity();

/// Time headway d_rel / v_ego; nullopt ("no threat") when the ego is nearly stopped.
inline std::optional<double> compute_thw(double gap, double v_ego) {
  if (v_ego < kMinThreatSpeed) return std::nullopt;
  return gap / v_ego;
}

/// Closed interval [start, end] of timesteps plus its THW minimum.
struct ThwWindow {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t changepoint = 0;  // first timestep attaining thw_min
  double thw_min = kNoThreat;

  bool operator==(const ThwWindow&) const = default;
};

/// Windows of a THW series (kNoThreat where there is no leader or no threat).
///
/// A window opens where THW <= 1.0 s and closes at the last sample before THW
/// rises above 1.0 s again. Windows separated by less than kMergeGap seconds
/// are merged. A window is kept iff its minimum is <= 0.8 s.
inline std::vector<ThwWindow> detect_windows(std::span<const double> thw, double dt) {
  std::vector<ThwWindow> runs;
  for (std::size_t t = 0; t < thw.size(); ++t) {
    if (!(thw[t] <= kTriggerThw)) continue;
    if (!runs.empty() && runs.back().end + 1 == t) {
      runs.back().end = t;
    } else if (!runs.empty() &&
               static_cast<double>(t - runs.back().end) * dt < kMergeGap) {
      runs.back().end = t;
    } else {
      runs.push_back({t, t, t, kNoThreat});
    }
  }
  std::vector<ThwWindow> kept;
  for (auto& w : runs) {
    for (std::size_t t = w.start; t <= w.end; ++t)
      if (thw[t] < w.thw_min) {
        w.thw_min = thw[t];
        w.changepoint = t;
      }
    if (w.thw_min <= kKeepThw) kept.push_back(w);
  }
  return kept;
}

/// One THW-triggered episode of an ego vehicle.
struct Scenario {
  int ego = 0;
  std::size_t t_start = 0;
  std::size_t t_end = 0;
  std::size_t t_changepoint = 0;
  double thw_min = kNoThreat;
  std::vector<double> thw_series;  // THW at t_start..t_end

  double duration(double dt) const { return static_cast<double>(t_end - t_start) * dt; }
  bool operator==(const Scenario&) const = default;
};

/// Nearest vehicle ahead of `ego` on its lane at `ts`, or -1.
inline int lane_leader(const sim::Trace& trace, int ego, std::size_t ts) {
  const auto& snap = trace.states[ts];
  const int lane = snap[static_cast<std::size_t>(ego)].lane;
  int prev = -1;
  for (int k = 0; k < trace.road.max_per_lane; ++k) {
    const int id = trace.slot(lane, k, ts);
    if (id == sim::kEmptySlot) break;
    if (id == ego) return prev;
    prev = id;
  }
  return -1;
}

/// Bumper gap to the lane leader at `ts`, if there is one.
inline std::optional<double> leader_gap(const sim::Trace& trace, int ego, std::size_t ts) {
  const int leader = lane_leader(trace, ego, ts);
  if (leader < 0) return std::nullopt;
  const auto& snap = trace.states[ts];
  return std::max(snap[static_cast<std::size_t>(leader)].x - snap[static_cast<std::size_t>(ego)].x -
                      sim::kVehicleLength,
                  0.0);
}

/// THW of `ego` at every timestep. At the ego's collision step the THW is 0;
/// afterwards the ego is frozen and reports no threat.
inline std::vector<double> thw_series(const sim::Trace& trace, int ego) {
  std::vector<double> out(trace.steps(), kNoThreat);
  const int crash = trace.collision_step(ego);
  for (std::size_t ts = 0; ts < trace.steps(); ++ts) {
    if (crash >= 0 && ts >= static_cast<std::size_t>(crash)) {
      if (ts == static_cast<std::size_t>(crash)) out[ts] = 0.0;
      continue;
    }
    const auto gap = leader_gap(trace, ego, ts);
    if (!gap) continue;
    if (const auto thw = compute_thw(*gap, trace.states[ts][static_cast<std::size_t>(ego)].v))
      out[ts] = *thw;
  }
  return out;
}

/// All kept scenarios, every vehicle taking the ego role in turn; ordered by (ego, t_start).
inline std::vector<Scenario> detect_scenarios(const sim::Trace& trace) {
  std::vector<Scenario> out;
  for (int ego = 0; ego < static_cast<int>(trace.vehicles()); ++ego) {
    const auto series = thw_series(trace, ego);
    for (const auto& w : detect_windows(series, trace.dt)) {
      Scenario s;
      s.ego = ego;
      s.t_start = w.start;
      s.t_end = w.end;
      s.t_changepoint = w.changepoint;
      s.thw_min = w.thw_min;
      s.thw_series.assign(series.begin() + static_cast<std::ptrdiff_t>(w.start),
                          series.begin() + static_cast<std::ptrdiff_t>(w.end) + 1);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace xmurf::scenario
