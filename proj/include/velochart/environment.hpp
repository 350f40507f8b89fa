// velochart: velocity-based channel charting with adaptive map matching
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "velochart/geometry.hpp"

namespace velochart {

// Axis-aligned obstacle. "blocking" shadows radio paths (NLoS attenuation),
// "inaccessible" keeps trajectories and generated maps out of the area.
struct Obstacle {
  Rect rect;
  bool blocking = true;
  bool inaccessible = true;
};

struct EnvironmentSpec {
  double width_m = 20.0;
  double height_m = 10.0;
  int bs_count = 6;
  int scatterer_count = 8;
  std::vector<Obstacle> obstacles;
  double bandwidth_hz = 2.0e8;
  int sample_count = 16;  // delay bins per base-station row (L_w)
  double noise_floor_db = -60.0;
  double nlos_attenuation = 0.1;
  double scatter_gain = 0.3;
  double min_path_m = 2.0;  // free-space power is clamped below this distance
};

struct Environment {
  Rect bounds;
  std::vector<Obstacle> obstacles;
  std::vector<Vec2> base_stations;
  std::vector<Vec2> scatterers;
  double bandwidth_hz = 0.0;
  int sample_count = 0;
  double noise_floor_db = 0.0;
  double nlos_attenuation = 0.1;
  double scatter_gain = 0.3;
  double min_path_m = 2.0;

  double noise_floor_linear() const;
  double bin_width_s() const { return 1.0 / bandwidth_hz; }

  // True when p lies inside bounds and outside every inaccessible obstacle.
  bool accessible(const Vec2& p, double wall_margin = 0.0) const;
  // True when the segment a-b crosses any inaccessible obstacle.
  bool crosses_inaccessible(const Vec2& a, const Vec2& b) const;
  // True when the segment a-b is shadowed by any blocking obstacle.
  bool path_blocked(const Vec2& a, const Vec2& b) const;
};

// Base stations go on the boundary at equidistant perimeter arc lengths;
// scatterers are seeded uniformly over the accessible area. Rejects specs
// without free space.
Environment generate_environment(const EnvironmentSpec& spec, std::uint64_t seed);

void validate_environment(const Environment& env);

std::string environment_to_json(const Environment& env);
Environment environment_from_json(const std::string& json_text);
void save_environment(const std::string& path, const Environment& env);
Environment load_environment(const std::string& path);

}  // namespace velochart
