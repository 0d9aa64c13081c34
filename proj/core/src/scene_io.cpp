#include "d3as/scene_io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <system_error>

#include <nlohmann/json.hpp>

namespace d3as::sim {

std::string format_double(double v) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument("format_double: non-finite value");
  }
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buf, res.ptr);
}

namespace {

void append_state(std::string& out, const SingleState& x) {
  out += '[';
  for (int i = 0; i < 4; ++i) {
    if (i) out += ',';
    out += format_double(x(i));
  }
  out += ']';
}

}  // namespace

std::string scene_to_json_line(const Scene& scene,
                               const std::string& config_id) {
  std::string out;
  out.reserve(256 + 64 * scene.measurements.size());
  out += "{\"config_id\":";
  out += nlohmann::json(config_id).dump();
  out += ",\"truths\":[";
  for (std::size_t k = 0; k < scene.truths.size(); ++k) {
    const GroundTruthTrajectory& traj = scene.truths[k];
    if (k) out += ',';
    out += "{\"id\":" + std::to_string(traj.object_id);
    out += ",\"t_s\":" + std::to_string(traj.t_s);
    out += ",\"states\":[";
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
      if (i) out += ',';
      append_state(out, traj.states[i]);
    }
    out += "]}";
  }
  out += "],\"measurements\":[";
  for (std::size_t k = 0; k < scene.measurements.size(); ++k) {
    const Measurement& m = scene.measurements[k];
    if (k) out += ',';
    out += "{\"z\":[";
    for (int i = 0; i < 3; ++i) {
      if (i) out += ',';
      out += format_double(m.z(i));
    }
    out += "],\"t\":" + std::to_string(m.t);
    out += ",\"b\":" + std::to_string(m.b);
    out += '}';
  }
  out += "]}";
  return out;
}

ParsedScene scene_from_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("scene parse error: ") + e.what());
  }
  try {
    ParsedScene parsed;
    parsed.config_id = j.at("config_id").get<std::string>();
    for (const auto& jt : j.at("truths")) {
      GroundTruthTrajectory traj;
      traj.object_id = jt.at("id").get<int>();
      traj.t_s = jt.at("t_s").get<int>();
      for (const auto& js : jt.at("states")) {
        if (js.size() != 4) throw std::runtime_error("state arity != 4");
        SingleState x;
        for (int i = 0; i < 4; ++i) x(i) = js.at(i).get<double>();
        traj.states.push_back(x);
      }
      parsed.scene.truths.push_back(std::move(traj));
    }
    for (const auto& jm : j.at("measurements")) {
      Measurement m;
      const auto& jz = jm.at("z");
      if (jz.size() != 3) throw std::runtime_error("measurement arity != 3");
      for (int i = 0; i < 3; ++i) m.z(i) = jz.at(i).get<double>();
      m.t = jm.at("t").get<int>();
      m.b = jm.at("b").get<int>();
      parsed.scene.measurements.push_back(m);
    }
    return parsed;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("scene schema error: ") + e.what());
  }
}

void write_scene_file(std::ostream& out, const std::vector<Scene>& scenes,
                      const std::string& config_id, std::uint64_t seed) {
  out << "# d3as scenes v1 config=" << config_id << " seed=" << seed
      << " count=" << scenes.size() << '\n';
  for (const Scene& scene : scenes) {
    out << scene_to_json_line(scene, config_id) << '\n';
  }
  if (!out) throw std::runtime_error("scene file write failed");
}

std::vector<ParsedScene> read_scene_file(std::istream& in) {
  std::vector<ParsedScene> scenes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    scenes.push_back(scene_from_json_line(line));
  }
  return scenes;
}

}  // namespace d3as::sim
