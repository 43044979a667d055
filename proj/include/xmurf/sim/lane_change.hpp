#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "../core/random.hpp"
#include "vehicle.hpp"

namespace xmurf::sim {

enum class LaneDecision { keep, change_left, change_right, abort };

/// Lane-change bookkeeping of one vehicle.
struct LaneChangeState {
  int origin_lane = 1;
  int target_lane = 1;
  bool changing = false;
  bool motivated = false;
  int direction = 0;     // +1 left, -1 right while motivated
  double waiting = 0.0;  // seconds since the motivation fired
  int returning_from = 0;  // lane left by an aborted change, reserved until settled back
};

inline constexpr double kGapFloor = 2.0;      // bumper gap accepted after long waiting
inline constexpr double kGapCeiling = 30.0;   // bumper gap demanded by a risk-free driver
inline constexpr double kAbortGap = 1.5;
inline constexpr double kMaxWaiting = 30.0;

/// Bumper gap demanded toward the new leader after `waiting` seconds.
/// Scales with (1 - risk) and decays toward kGapFloor; more patient drivers decay slower.
inline double accepted_gap(const BehaviorProfile& p, double waiting) {
  const double nominal = kGapFloor + (kGapCeiling - kGapFloor) * (1.0 - p.risk);
  const double tau = 5.0 + 25.0 * p.patience;
  return kGapFloor + (nominal - kGapFloor) * std::exp(-waiting / tau);
}

struct LaneGaps {
  double front = std::numeric_limits<double>::infinity();  // bumper gap to nearest vehicle ahead
  double rear = std::numeric_limits<double>::infinity();
  bool overlap = false;  // some vehicle alongside the ego
};

inline LaneGaps lane_gaps(const std::vector<VehicleState>& scene, std::size_t ego, int lane) {
  LaneGaps g;
  const auto& e = scene[ego];
  for (std::size_t j = 0; j < scene.size(); ++j) {
    if (j == ego || scene[j].lane != lane) continue;
    const double dx = scene[j].x - e.x;
    if (std::abs(dx) < kVehicleLength) {
      g.overlap = true;
      g.front = g.rear = 0.0;
    } else if (dx > 0) {
      g.front = std::min(g.front, dx - kVehicleLength);
    } else {
      g.rear = std::min(g.rear, -dx - kVehicleLength);
    }
  }
  return g;
}

/// One decision step for vehicle `ego`.
///
/// `lane_load[l]` counts vehicles on or heading for lane l (1-based); a change
/// is only accepted into a lane with spare capacity. Random draws happen only
/// while idle, one per step, so identical rng state gives identical decisions.
inline LaneDecision lane_change_decision(const std::vector<VehicleState>& scene, std::size_t ego,
                                         const BehaviorProfile& profile, LaneChangeState& lc,
                                         const RoadConfig& road, const std::vector<int>& lane_load,
                                         double dt, Rng& rng) {
  const auto& e = scene[ego];
  if (lc.returning_from != 0) return LaneDecision::keep;
  if (lc.changing) {
    if (e.lane != lc.target_lane) {
      const LaneGaps g = lane_gaps(scene, ego, lc.target_lane);
      if (g.overlap || g.front < kAbortGap || g.rear < kAbortGap) return LaneDecision::abort;
    }
    return LaneDecision::keep;
  }
  if (!lc.motivated) {
    if (!bernoulli(rng, profile.lane_change_rate * dt)) return LaneDecision::keep;
    const bool left = e.lane < road.lanes;
    const bool right = e.lane > 1;
    if (left && right)
      lc.direction = bernoulli(rng, 0.5) ? 1 : -1;
    else
      lc.direction = left ? 1 : -1;
    lc.motivated = true;
    lc.waiting = 0.0;
  } else {
    lc.waiting += dt;
    if (lc.waiting > kMaxWaiting) {
      lc.motivated = false;
      return LaneDecision::keep;
    }
  }
  const int target = e.lane + lc.direction;
  if (target < 1 || target > road.lanes) {
    lc.motivated = false;
    return LaneDecision::keep;
  }
  if (lane_load[static_cast<std::size_t>(target)] >= road.max_per_lane) return LaneDecision::keep;
  const LaneGaps g = lane_gaps(scene, ego, target);
  if (g.overlap) return LaneDecision::keep;
  const double need_front = accepted_gap(profile, lc.waiting);
  const double need_rear = need_front * (0.5 + profile.politeness);
  if (g.front < need_front || g.rear < need_rear) return LaneDecision::keep;
  lc.motivated = false;
  return lc.direction > 0 ? LaneDecision::change_left : LaneDecision::change_right;
}

}  // namespace xmurf::sim
