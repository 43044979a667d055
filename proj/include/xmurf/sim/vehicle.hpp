#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "../core/error.hpp"

namespace xmurf::sim {

inline constexpr double kGravity = 9.81;
inline constexpr double kVehicleLength = 4.5;
inline constexpr double kVehicleWidth = 1.8;
inline constexpr double kWheelbase = 2.7;

/// Straight multi-lane highway. Lane 1 is the rightmost lane; y grows to the left.
struct RoadConfig {
  int lanes = 3;
  double lane_width = 3.75;
  int max_per_lane = 4;          // n_vpl
  double speed_limit = 36.0;     // m/s
  double max_leader_gap = 100.0; // d_il,max, m; also the length of the placement segment

  void validate() const {
    if (lanes != 2 && lanes != 3)
      throw ConfigError("lane count must be 2 or 3, got " + std::to_string(lanes));
    if (max_per_lane < 2) throw ConfigError("max vehicles per lane must be >= 2");
    if (!(max_leader_gap > 0.0)) throw ConfigError("max inter-leader gap must be positive");
    if (!(lane_width > kVehicleWidth)) throw ConfigError("lane narrower than a vehicle");
    if (!(speed_limit > 0.0)) throw ConfigError("speed limit must be positive");
  }

  double lane_center(int lane) const { return (lane - 0.5) * lane_width; }

  /// Lane whose boundaries contain y, clamped to the road.
  int lane_at(double y) const {
    const int lane = static_cast<int>(std::floor(y / lane_width)) + 1;
    return std::clamp(lane, 1, lanes);
  }

  bool operator==(const RoadConfig&) const = default;
};

/// Per-vehicle abilities and driving style.
struct BehaviorProfile {
  double a_max = 2.0;       // a_m, m/s^2
  double a_dec_max = kGravity;
  double b = 4.0;           // Gompertz displacement
  double c = 0.1;           // Gompertz growth rate
  double risk = 0.5;        // [0,1], higher accepts smaller gaps
  double patience = 0.5;    // [0,1], higher waits longer before lowering its gap demand
  double politeness = 0.5;  // [0,1], higher leaves more room to the new follower
  double reaction_time = 0.5;
  double v_target = 18.0;
  double lane_change_rate = 0.05;  // motivation events per second

  void validate() const {
    if (!(a_max > 0.0 && b > 0.0 && c > 0.0)) throw ConfigError("Gompertz parameters must be positive");
    if (!(reaction_time >= 0.0)) throw ConfigError("reaction time must be non-negative");
    if (!(v_target >= 0.0)) throw ConfigError("target velocity must be non-negative");
  }

  bool operator==(const BehaviorProfile&) const = default;
};

struct VehicleState {
  double x = 0.0;      // longitudinal position, m
  double y = 0.0;      // lateral position, m
  double v = 0.0;      // speed, m/s
  double a = 0.0;      // longitudinal acceleration applied to reach this state
  double psi = 0.0;    // heading, rad
  double delta = 0.0;  // steering angle, rad
  int lane = 1;

  bool operator==(const VehicleState&) const = default;
};

struct Collision {
  int step = 0;
  int first = 0;   // vehicle ids, first < second
  int second = 0;
  bool operator==(const Collision&) const = default;
};

struct LaneChangeEvent {
  int step = 0;
  int vehicle = 0;
  int from = 0;
  int to = 0;
  bool operator==(const LaneChangeEvent&) const = default;
};

inline constexpr int kEmptySlot = -1;

/// Full simulation record. Vehicle ids are indices into each snapshot.
struct Trace {
  double dt = 0.05;
  RoadConfig road;
  std::uint64_t seed = 0;
  std::vector<std::vector<VehicleState>> states;  // [timestep][vehicle]
  std::vector<int> index_array;                   // [timestep][lane-1][slot], front-most first
  std::vector<Collision> collisions;
  std::vector<LaneChangeEvent> lane_changes;
  int lateral_limit_steps = 0;  // vehicle-steps whose steering implied a_y > 0.4 g

  std::size_t steps() const noexcept { return states.size(); }
  std::size_t vehicles() const noexcept { return states.empty() ? 0 : states.front().size(); }

  /// Entry A(lane, slot, ts) of the index array; kEmptySlot when unused.
  int slot(int lane, int k, std::size_t ts) const {
    const auto per_step = static_cast<std::size_t>(road.lanes * road.max_per_lane);
    return index_array[ts * per_step + static_cast<std::size_t>((lane - 1) * road.max_per_lane + k)];
  }

  /// First step at which vehicle `id` collided, or -1.
  int collision_step(int id) const {
    for (const auto& c : collisions)
      if (c.first == id || c.second == id) return c.step;
    return -1;
  }

  bool operator==(const Trace&) const = default;
};

/// Rebuilds index array and lane-change events from the per-step states.
inline void rebuild_derived(Trace& trace) {
  const auto& road = trace.road;
  const auto per_step = static_cast<std::size_t>(road.lanes * road.max_per_lane);
  trace.index_array.assign(per_step * trace.steps(), kEmptySlot);
  trace.lane_changes.clear();
  std::vector<int> order;
  for (std::size_t ts = 0; ts < trace.steps(); ++ts) {
    const auto& snap = trace.states[ts];
    for (int lane = 1; lane <= road.lanes; ++lane) {
      order.clear();
      for (int id = 0; id < static_cast<int>(snap.size()); ++id)
        if (snap[id].lane == lane) order.push_back(id);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return snap[a].x != snap[b].x ? snap[a].x > snap[b].x : a < b;
      });
      if (static_cast<int>(order.size()) > road.max_per_lane)
        throw InvariantError("lane " + std::to_string(lane) + " holds more than " +
                             std::to_string(road.max_per_lane) + " vehicles at step " +
                             std::to_string(ts));
      for (std::size_t k = 0; k < order.size(); ++k)
        trace.index_array[ts * per_step + (lane - 1) * road.max_per_lane + k] = order[k];
    }
    if (ts == 0) continue;
    const auto& prev = trace.states[ts - 1];
    for (int id = 0; id < static_cast<int>(snap.size()); ++id)
      if (snap[id].lane != prev[id].lane)
        trace.lane_changes.push_back({static_cast<int>(ts), id, prev[id].lane, snap[id].lane});
  }
}

}  // namespace xmurf::sim
