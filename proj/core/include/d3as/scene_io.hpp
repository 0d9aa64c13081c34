#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "d3as/simkit.hpp"

namespace d3as::sim {

// Shortest decimal string that round-trips the exact double value.
std::string format_double(double v);

// One scene as a single JSON object line:
//   {"config_id": ..., "truths": [{"id", "t_s", "states": [[4 floats]...]}],
//    "measurements": [{"z": [3 floats], "t", "b"}]}
std::string scene_to_json_line(const Scene& scene,
                               const std::string& config_id);

struct ParsedScene {
  std::string config_id;
  Scene scene;
};

// Throws std::runtime_error on malformed input.
ParsedScene scene_from_json_line(const std::string& line);

// JSON-lines file: a '#' header comment carrying config id, seed, and scene
// count, then one scene per line. count = 0 writes just the header.
void write_scene_file(std::ostream& out, const std::vector<Scene>& scenes,
                      const std::string& config_id, std::uint64_t seed);

// Skips '#' lines and blank lines.
std::vector<ParsedScene> read_scene_file(std::istream& in);

}  // namespace d3as::sim
