#pragma once

#include <algorithm>
#include <cmath>

#include "vehicle.hpp"

namespace xmurf::sim {

/// a_m * exp(-b * exp(-c * u)).
inline double gompertz(double a_max, double b, double c, double u) {
  return a_max * std::exp(-b * std::exp(-c * u));
}

/// Free-flow acceleration offered to a follower at bumper gap d_fl.
inline double gompertz_follower_accel(double gap, const BehaviorProfile& p) {
  return gompertz(p.a_max, p.b, p.c, gap);
}

/// Acceleration of a vehicle without a leader on its lane.
///
/// When the vehicle trails the next lane leader (on another lane) by more than
/// d_il,max it closes up with the gap-argument branch; otherwise it regulates
/// toward its target velocity with the velocity-argument branch, signed so
/// that it slows down above the target.
inline double gompertz_leader_accel(double v, double leader_gap, const BehaviorProfile& p,
                                    const RoadConfig& road) {
  if (leader_gap > road.max_leader_gap) return gompertz(p.a_max, p.b, p.c, leader_gap);
  const double dv = p.v_target - v;
  if (dv == 0.0) return 0.0;
  const double mag = gompertz(p.a_max, p.b, p.c, std::abs(dv));
  return dv > 0.0 ? mag : -mag;
}

inline constexpr double kBrakeMinGap = 2.0;
inline constexpr double kBrakeGapFloor = 0.1;

/// Deceleration that removes the closing speed at kBrakeMinGap, capped at a_dec_max.
inline double follower_brake(double gap, double v_follower, double v_leader,
                             const BehaviorProfile& p) {
  const double closing = std::max(v_follower - v_leader, 0.0);
  const double room = std::max(gap - kBrakeMinGap, kBrakeGapFloor);
  return -std::min(p.a_dec_max, closing * closing / (2.0 * room));
}

/// Car-following acceleration: the Gompertz response capped by the free-flow
/// term, plus the braking term, saturated to [-a_dec_max, a_m].
inline double follower_accel(double gap, double v_follower, double v_leader, double free_accel,
                             const BehaviorProfile& p) {
  const double a = std::min(gompertz_follower_accel(gap, p), free_accel) +
                   follower_brake(gap, v_follower, v_leader, p);
  return std::clamp(a, -p.a_dec_max, p.a_max);
}

/// Gains of the lane-keeping P-controller.
inline double lookahead_time(double v) { return std::clamp(0.5 + 0.05 * v, 0.5, 2.0); }
inline double distance_gain(double v) { return 0.4 / std::max(v, 5.0); }
inline constexpr double kHeadingGain = 1.0;
inline constexpr double kMaxSteer = 0.5;
inline constexpr double kLateralLimit = 0.4 * kGravity;

/// Steering bound keeping the steady-state lateral acceleration at 0.4 g.
inline double max_steer(double v) {
  const double vv = std::max(v, 1.0);
  return std::min(kMaxSteer, std::atan(kLateralLimit * kWheelbase / (vv * vv)));
}

struct Pose {
  double y = 0.0;
  double psi = 0.0;
};

/// Pose after `horizon` seconds of constant speed and steering angle.
inline Pose predict_pose(const VehicleState& s, double v, double horizon) {
  const double t = std::tan(s.delta);
  if (std::abs(t) < 1e-12) return {s.y + v * horizon * std::sin(s.psi), s.psi};
  const double radius = kWheelbase / t;
  const double psi = s.psi + v * t / kWheelbase * horizon;
  return {s.y - radius * (std::cos(psi) - std::cos(s.psi)), psi};
}

/// Steering command toward the lane center `target_y` (heading 0).
/// e_d > 0 means the predicted pose is left of the target; the command steers against it.
inline double lateral_control(const VehicleState& s, double target_y, double v) {
  const Pose p = predict_pose(s, v, lookahead_time(v));
  const double e_d = p.y - target_y;
  const double e_psi = p.psi;
  const double cmd = -(distance_gain(v) * e_d + kHeadingGain * e_psi);
  const double lim = max_steer(v);
  return std::clamp(cmd, -lim, lim);
}

/// Steering angle that reproduces itself through lateral_control, i.e. the
/// command the controller settles on when its prediction uses that angle.
/// The controller output decreases in the assumed angle, so bisection finds
/// the unique fixed point.
inline double settled_steering(VehicleState s, double target_y, double v) {
  const double lim = max_steer(v);
  double lo = -lim, hi = lim;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    s.delta = mid;
    if (lateral_control(s, target_y, v) > mid)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct StepResult {
  VehicleState state;
  bool lateral_limit_exceeded = false;  // implied a_y above 0.4 g
};

/// Kinematic one-track update with explicit Euler.
inline StepResult one_track_step(const VehicleState& s, double delta_cmd, double a_cmd, double dt) {
  StepResult r{s, false};
  auto& n = r.state;
  const double yaw_rate = s.v / kWheelbase * std::tan(delta_cmd);
  n.psi = s.psi + yaw_rate * dt;
  n.x = s.x + s.v * std::cos(s.psi) * dt;
  n.y = s.y + s.v * std::sin(s.psi) * dt;
  n.v = std::max(0.0, s.v + a_cmd * dt);
  n.a = a_cmd;
  n.delta = delta_cmd;
  r.lateral_limit_exceeded = std::abs(s.v * s.v * std::tan(delta_cmd) / kWheelbase) > kLateralLimit;
  return r;
}

}  // namespace xmurf::sim
