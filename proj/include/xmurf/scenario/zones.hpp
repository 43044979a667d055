#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string_view>

#include "../sim/vehicle.hpp"

namespace xmurf::scenario {

enum class Zone { front = 0, rear, left_front, left_rear, right_front, right_rear };
inline constexpr std::size_t kZoneCount = 6;
inline constexpr std::array<std::string_view, kZoneCount> kZoneNames = {
    "front", "rear", "left_front", "left_rear", "right_front", "right_rear"};

inline constexpr double kZoneHorizon = 2.0;  // s of ego travel covered by a zone
inline constexpr double kMinZoneExtent = 20.0;
inline constexpr double kMaxZoneExtent = 120.0;

/// Longitudinal reach of every zone at ego speed v.
inline double zone_extent(double v_ego) {
  return std::clamp(v_ego * kZoneHorizon, kMinZoneExtent, kMaxZoneExtent);
}

struct ZoneSlot {
  int vehicle = -1;
  double distance = 0.0;      // |x_tg - x_ego|, m
  double rel_velocity = 0.0;  // v_tg - v_ego, m/s
  bool operator==(const ZoneSlot&) const = default;
};

struct ZoneOccupancy {
  std::array<std::optional<ZoneSlot>, kZoneCount> slots;
  double extent = kMinZoneExtent;

  const std::optional<ZoneSlot>& operator[](Zone z) const { return slots[static_cast<std::size_t>(z)]; }
};

/// Nearest vehicle per zone around `ego` at timestep `ts`. Zones are the
/// ego lane and its two neighbours, split at the ego position (ahead = dx >= 0).
inline ZoneOccupancy assign_zones(const sim::Trace& trace, int ego, std::size_t ts) {
  const auto& snap = trace.states[ts];
  const auto& e = snap[static_cast<std::size_t>(ego)];
  ZoneOccupancy occ;
  occ.extent = zone_extent(e.v);
  for (int j = 0; j < static_cast<int>(snap.size()); ++j) {
    if (j == ego) continue;
    const auto& o = snap[static_cast<std::size_t>(j)];
    const int offset = o.lane - e.lane;
    if (offset < -1 || offset > 1) continue;
    const double dx = o.x - e.x;
    if (std::abs(dx) > occ.extent) continue;
    const bool ahead = dx >= 0.0;
    Zone z;
    if (offset == 0)
      z = ahead ? Zone::front : Zone::rear;
    else if (offset > 0)
      z = ahead ? Zone::left_front : Zone::left_rear;
    else
      z = ahead ? Zone::right_front : Zone::right_rear;
    auto& slot = occ.slots[static_cast<std::size_t>(z)];
    if (!slot || std::abs(dx) < slot->distance)
      slot = ZoneSlot{j, std::abs(dx), o.v - e.v};
  }
  return occ;
}

}  // namespace xmurf::scenario
