#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "../core/random.hpp"
#include "dynamics.hpp"
#include "lane_change.hpp"
#include "vehicle.hpp"

namespace xmurf::sim {

struct SimParams {
  double dt = 0.05;
  double duration = 60.0;
  std::uint64_t seed = 0;
  /// Mean of the exponential interval between target-velocity redraws; 0 disables redraws.
  double retarget_interval = 30.0;

  void validate() const {
    if (!(dt > 0.0 && dt <= 0.1)) throw ConfigError("dt must lie in (0, 0.1]");
    if (!(duration > 0.0)) throw ConfigError("duration must be positive");
    if (!(retarget_interval >= 0.0)) throw ConfigError("retarget interval must be non-negative");
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }
};

struct Scene {
  std::vector<VehicleState> vehicles;
  std::vector<BehaviorProfile> profiles;

  bool operator==(const Scene&) const = default;
};

inline constexpr double kTargetSpeedMean = 18.0;
inline constexpr double kTargetSpeedStd = 4.0;
inline constexpr double kMinTargetSpeed = 5.0;

inline double draw_target_speed(Rng& rng, const RoadConfig& road) {
  const double v = std::normal_distribution<double>(kTargetSpeedMean, kTargetSpeedStd)(rng);
  return std::clamp(v, kMinTargetSpeed, road.speed_limit);
}

inline BehaviorProfile draw_profile(Rng& rng, const RoadConfig& road) {
  BehaviorProfile p;
  p.a_max = uniform(rng, 1.5, 4.0);
  p.a_dec_max = kGravity;
  p.b = uniform(rng, 2.0, 6.0);
  p.c = uniform(rng, 0.03, 0.15);
  p.risk = uniform(rng, 0.0, 1.0);
  p.patience = uniform(rng, 0.0, 1.0);
  p.politeness = uniform(rng, 0.0, 1.0);
  p.reaction_time = uniform(rng, 0.3, 1.2);
  p.lane_change_rate = uniform(rng, 0.01, 0.1);
  p.v_target = draw_target_speed(rng, road);
  return p;
}

/// Vehicle count bounds n_l + 1 <= n_v <= n_l * n_vpl.
inline std::pair<int, int> vehicle_count_bounds(const RoadConfig& road) {
  return {road.lanes + 1, road.lanes * road.max_per_lane};
}

/// Random initial scene: vehicles on lane centers at their target speed,
/// spread over [0, d_il,max] with at least one vehicle length between bumpers.
inline Scene init_scene(const RoadConfig& road, std::uint64_t seed) {
  road.validate();
  const auto [lo, hi] = vehicle_count_bounds(road);
  if (lo > hi)
    throw ConfigError("vehicle count range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      "] is empty");
  Rng rng(seed);
  const int n = std::uniform_int_distribution<int>(lo, hi)(rng);

  std::vector<int> per_lane(static_cast<std::size_t>(road.lanes), 0);
  std::vector<int> lane_of(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<int> open;
    for (int l = 0; l < road.lanes; ++l)
      if (per_lane[l] < road.max_per_lane) open.push_back(l);
    const int l = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
    ++per_lane[l];
    lane_of[i] = l + 1;
  }

  constexpr double spacing = 2.0 * kVehicleLength;
  Scene scene;
  scene.vehicles.resize(static_cast<std::size_t>(n));
  for (int l = 1; l <= road.lanes; ++l) {
    std::vector<int> ids;
    for (int i = 0; i < n; ++i)
      if (lane_of[i] == l) ids.push_back(i);
    if (ids.empty()) continue;
    const double slack = road.max_leader_gap - spacing * static_cast<double>(ids.size() - 1);
    if (slack < 0.0)
      throw ConfigError("road segment of " + std::to_string(road.max_leader_gap) +
                        " m is too short for " + std::to_string(ids.size()) + " vehicles in lane " +
                        std::to_string(l));
    std::vector<double> offsets(ids.size());
    for (auto& o : offsets) o = uniform(rng, 0.0, slack);
    std::sort(offsets.begin(), offsets.end());
    for (std::size_t k = 0; k < ids.size(); ++k) {
      auto& s = scene.vehicles[static_cast<std::size_t>(ids[k])];
      s.x = offsets[k] + spacing * static_cast<double>(k);
      s.y = road.lane_center(l);
      s.lane = l;
    }
  }
  scene.profiles.reserve(scene.vehicles.size());
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    scene.profiles.push_back(draw_profile(rng, road));
    scene.vehicles[i].v = scene.profiles.back().v_target;
  }
  return scene;
}

namespace detail {

inline bool overlapping(const VehicleState& a, const VehicleState& b) {
  return std::abs(a.x - b.x) < kVehicleLength &&
         (a.lane == b.lane || std::abs(a.y - b.y) < kVehicleWidth);
}

// Nearest vehicle ahead of `ego` on `lane` in `seen`, or -1.
inline int leader_on_lane(const std::vector<VehicleState>& seen, std::size_t ego, int lane) {
  int best = -1;
  for (std::size_t j = 0; j < seen.size(); ++j) {
    if (j == ego || seen[j].lane != lane || seen[j].x < seen[ego].x) continue;
    if (seen[j].x == seen[ego].x && j < ego) continue;
    if (best < 0 || seen[j].x < seen[static_cast<std::size_t>(best)].x) best = static_cast<int>(j);
  }
  return best;
}

}  // namespace detail

/// Simulates `initial` for params.steps() snapshots (the initial one included).
///
/// Controllers see the scene delayed by round(reaction_time / dt) steps.
/// Two vehicles collide when their bodies overlap longitudinally while sharing
/// a lane or overlapping laterally; both are frozen from then on.
inline Trace run_simulation(const RoadConfig& road, const SimParams& params, Scene initial) {
  road.validate();
  params.validate();
  for (const auto& p : initial.profiles) p.validate();
  if (initial.profiles.size() != initial.vehicles.size())
    throw ConfigError("scene has mismatched vehicle and profile counts");

  const std::size_t n = initial.vehicles.size();
  const std::size_t steps = std::max<std::size_t>(params.steps(), 1);
  const double dt = params.dt;
  Rng rng(derive_seed(params.seed, std::uint64_t{1}));

  Trace trace;
  trace.dt = dt;
  trace.road = road;
  trace.seed = params.seed;
  trace.states.reserve(steps);
  for (auto& s : initial.vehicles) s.lane = road.lane_at(s.y);
  trace.states.push_back(initial.vehicles);

  auto profiles = initial.profiles;
  std::vector<LaneChangeState> lc(n);
  std::vector<std::size_t> delay(n);
  std::vector<double> next_retarget(n, std::numeric_limits<double>::infinity());
  std::vector<bool> frozen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    lc[i].origin_lane = lc[i].target_lane = initial.vehicles[i].lane;
    delay[i] = static_cast<std::size_t>(std::llround(profiles[i].reaction_time / dt));
    if (params.retarget_interval > 0.0)
      next_retarget[i] =
          std::exponential_distribution<double>(1.0 / params.retarget_interval)(rng);
  }
  std::set<std::pair<int, int>> collided;
  std::vector<int> lane_load(static_cast<std::size_t>(road.lanes) + 1);

  for (std::size_t t = 0; t + 1 < steps; ++t) {
    const auto& cur = trace.states[t];
    auto next = cur;
    const double now = static_cast<double>(t) * dt;

    std::fill(lane_load.begin(), lane_load.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int lanes[4] = {cur[i].lane, lc[i].target_lane, lc[i].origin_lane, lc[i].returning_from};
      for (int k = 0; k < 4; ++k)
        if (lanes[k] != 0 && std::find(lanes, lanes + k, lanes[k]) == lanes + k)
          ++lane_load[static_cast<std::size_t>(lanes[k])];
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (frozen[i]) {
        next[i].v = 0.0;
        next[i].a = 0.0;
        continue;
      }
      auto& prof = profiles[i];
      while (now >= next_retarget[i]) {
        prof.v_target = draw_target_speed(rng, road);
        next_retarget[i] +=
            std::exponential_distribution<double>(1.0 / params.retarget_interval)(rng);
      }

      const auto& seen = trace.states[t >= delay[i] ? t - delay[i] : 0];
      const auto& me = seen[i];
      double accel = 0.0;
      bool has_leader = false;
      const double free_accel = gompertz_leader_accel(me.v, 0.0, prof, road);
      double follow = prof.a_max;
      for (int lane : {cur[i].lane, lc[i].target_lane}) {
        const int j = detail::leader_on_lane(seen, i, lane);
        if (j < 0) continue;
        has_leader = true;
        const auto& ld = seen[static_cast<std::size_t>(j)];
        const double gap = std::max(ld.x - me.x - kVehicleLength, 0.0);
        follow = std::min(follow, follower_accel(gap, me.v, ld.v, free_accel, prof));
      }
      if (has_leader) {
        accel = follow;
      } else {
        // trailing distance to the nearest moving lane leader ahead on another lane
        double leader_gap = 0.0;
        bool found = false;
        for (int lane = 1; lane <= road.lanes; ++lane) {
          if (lane == cur[i].lane) continue;
          int front = -1;
          for (std::size_t j = 0; j < n; ++j)
            if (!frozen[j] && seen[j].lane == lane &&
                (front < 0 || seen[j].x > seen[static_cast<std::size_t>(front)].x))
              front = static_cast<int>(j);
          if (front < 0) continue;
          const double d = seen[static_cast<std::size_t>(front)].x - me.x;
          if (d > 0.0 && (!found || d < leader_gap)) {
            leader_gap = d;
            found = true;
          }
        }
        accel = gompertz_leader_accel(me.v, leader_gap, prof, road);
      }
      if (cur[i].v >= road.speed_limit) accel = std::min(accel, 0.0);
      accel = std::clamp(accel, -prof.a_dec_max, prof.a_max);

      switch (lane_change_decision(cur, i, prof, lc[i], road, lane_load, dt, rng)) {
        case LaneDecision::change_left:
        case LaneDecision::change_right: {
          const int target = cur[i].lane + lc[i].direction;
          lc[i].origin_lane = cur[i].lane;
          lc[i].target_lane = target;
          lc[i].changing = true;
          ++lane_load[static_cast<std::size_t>(target)];
          break;
        }
        case LaneDecision::abort:
          lc[i].returning_from = lc[i].target_lane;
          lc[i].target_lane = lc[i].origin_lane;
          lc[i].changing = false;
          break;
        case LaneDecision::keep:
          break;
      }

      const double target_y = road.lane_center(lc[i].target_lane);
      const double steer = settled_steering(cur[i], target_y, cur[i].v);
      const auto step = one_track_step(cur[i], steer, accel, dt);
      if (step.lateral_limit_exceeded) ++trace.lateral_limit_steps;
      next[i] = step.state;
      next[i].lane = road.lane_at(next[i].y);
      if (next[i].lane == lc[i].target_lane && std::abs(next[i].y - target_y) < 0.15) {
        lc[i].changing = false;
        lc[i].origin_lane = lc[i].target_lane;
        lc[i].returning_from = 0;
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (frozen[i] && frozen[j]) continue;
        if (!detail::overlapping(next[i], next[j])) continue;
        const std::pair<int, int> key{static_cast<int>(i), static_cast<int>(j)};
        if (!collided.insert(key).second) continue;
        trace.collisions.push_back({static_cast<int>(t + 1), key.first, key.second});
        for (std::size_t k : {i, j}) {
          frozen[k] = true;
          next[k].v = 0.0;
          next[k].a = 0.0;
        }
      }
    }
    trace.states.push_back(std::move(next));
  }
  rebuild_derived(trace);
  return trace;
}

/// Seeded run: the scene comes from init_scene(road, params.seed).
inline Trace run_simulation(const RoadConfig& road, const SimParams& params) {
  return run_simulation(road, params, init_scene(road, params.seed));
}

}  // namespace xmurf::sim
