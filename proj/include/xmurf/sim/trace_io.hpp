#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vehicle.hpp"

namespace xmurf::sim {

// JSON-lines trace format. Line 1 is {"header": {...}} with the road and run
// settings; every following line is one timestep:
//   {"t": k, "vehicles": [{id, x, y, v, a, psi, delta, lane}], "collisions": [[i, j], ...]}
// Collisions are listed at the step where they were first detected.

inline nlohmann::json trace_header(const Trace& trace) {
  return {{"dt", trace.dt},
          {"seed", trace.seed},
          {"lanes", trace.road.lanes},
          {"lane_width", trace.road.lane_width},
          {"max_per_lane", trace.road.max_per_lane},
          {"speed_limit", trace.road.speed_limit},
          {"max_leader_gap", trace.road.max_leader_gap},
          {"vehicles", trace.vehicles()},
          {"steps", trace.steps()},
          {"lateral_limit_steps", trace.lateral_limit_steps}};
}

inline void write_trace(const Trace& trace, std::ostream& out) {
  out << nlohmann::json{{"header", trace_header(trace)}}.dump() << '\n';
  std::size_t next_collision = 0;
  for (std::size_t ts = 0; ts < trace.steps(); ++ts) {
    nlohmann::json line;
    line["t"] = ts;
    auto vehicles = nlohmann::json::array();
    const auto& snap = trace.states[ts];
    for (std::size_t id = 0; id < snap.size(); ++id) {
      const auto& s = snap[id];
      vehicles.push_back({{"id", id}, {"x", s.x}, {"y", s.y}, {"v", s.v}, {"a", s.a},
                          {"psi", s.psi}, {"delta", s.delta}, {"lane", s.lane}});
    }
    line["vehicles"] = std::move(vehicles);
    auto collisions = nlohmann::json::array();
    while (next_collision < trace.collisions.size() &&
           trace.collisions[next_collision].step == static_cast<int>(ts)) {
      const auto& c = trace.collisions[next_collision++];
      collisions.push_back({c.first, c.second});
    }
    line["collisions"] = std::move(collisions);
    out << line.dump() << '\n';
  }
}

inline void save_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_trace(trace, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Trace read_trace(std::istream& in, const std::string& name = "<trace>") {
  Trace trace;
  std::string text;
  std::size_t line_no = 0;
  try {
    if (!std::getline(in, text)) throw ParseError(name + ": empty trace");
    ++line_no;
    const auto header = nlohmann::json::parse(text).at("header");
    trace.dt = header.at("dt").get<double>();
    trace.seed = header.at("seed").get<std::uint64_t>();
    trace.road.lanes = header.at("lanes").get<int>();
    trace.road.lane_width = header.at("lane_width").get<double>();
    trace.road.max_per_lane = header.at("max_per_lane").get<int>();
    trace.road.speed_limit = header.at("speed_limit").get<double>();
    trace.road.max_leader_gap = header.at("max_leader_gap").get<double>();
    trace.lateral_limit_steps = header.value("lateral_limit_steps", 0);
    const auto n = header.at("vehicles").get<std::size_t>();
    while (std::getline(in, text)) {
      ++line_no;
      if (text.empty()) continue;
      const auto line = nlohmann::json::parse(text);
      const auto ts = line.at("t").get<std::size_t>();
      if (ts != trace.steps()) throw ParseError(name + ": timesteps out of order");
      std::vector<VehicleState> snap(n);
      const auto& vehicles = line.at("vehicles");
      if (vehicles.size() != n) throw ParseError(name + ": vehicle count changes");
      for (const auto& v : vehicles) {
        const auto id = v.at("id").get<std::size_t>();
        if (id >= n) throw ParseError(name + ": vehicle id out of range");
        auto& s = snap[id];
        s.x = v.at("x").get<double>();
        s.y = v.at("y").get<double>();
        s.v = v.at("v").get<double>();
        s.a = v.at("a").get<double>();
        s.psi = v.at("psi").get<double>();
        s.delta = v.value("delta", 0.0);
        s.lane = v.at("lane").get<int>();
      }
      for (const auto& c : line.at("collisions"))
        trace.collisions.push_back({static_cast<int>(ts), c.at(0).get<int>(), c.at(1).get<int>()});
      trace.states.push_back(std::move(snap));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(name + ":" + std::to_string(line_no) + ": " + e.what());
  }
  trace.road.validate();
  rebuild_derived(trace);
  return trace;
}

inline Trace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_trace(in, path);
}

}  // namespace xmurf::sim
