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

#include "velochart/environment.hpp"

namespace velochart {

struct MotionSpec {
  double mean_speed_mps = 1.0;
  double speed_std = 0.45;
  double turn_rate_std = 0.7;  // heading diffusion, rad per sqrt(second)
  double duration_s = 60.0;

  // Governs the Trajectory speed invariant; generated speeds are clamped here.
  double max_speed() const { return mean_speed_mps + 4.0 * speed_std + 0.5; }
};

struct Trajectory {
  double sample_rate_hz = 0.0;
  std::vector<double> timestamps;
  std::vector<Vec2> positions;

  std::size_t size() const { return positions.size(); }
};

// Heading-and-speed random walk: speed follows a mean-reverting process
// clamped at 0 (standstills allowed), heading diffuses, walls and
// inaccessible obstacles reflect. Deterministic per (env, motion, rate, seed).
Trajectory generate_trajectory(const Environment& env, const MotionSpec& motion,
                               double rate_hz, std::uint64_t seed);

// Checks the Trajectory invariants against its environment; throws
// std::runtime_error naming the first violated property.
void validate_trajectory(const Trajectory& traj, const Environment& env,
                         double max_speed);

std::string trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const std::string& json_text);

}  // namespace velochart
