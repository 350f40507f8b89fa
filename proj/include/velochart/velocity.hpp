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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "velochart/geometry.hpp"
#include "velochart/trajectory.hpp"

namespace velochart {

struct VelocitySeries {
  std::vector<double> timestamps;
  std::vector<Vec2> velocities;
  std::uint32_t source_id = 0;

  std::size_t size() const { return velocities.size(); }
};

struct NoiseProfile {
  double angular_bias = 0.0;     // rad/s, accumulates from recording start
  double magnitude_bias = 0.0;   // m/s, speeds clamp at 0
  // (position percent in [0,100), angle rad); applied once passed
  std::vector<std::pair<double, double>> instantaneous_rotations;
};

// The five preset levels; 0 is the identity.
NoiseProfile noise_preset(int level);

// Forward differences (p_{i+1} - p_i) * rate_hz; one sample shorter than the
// trajectory and sharing its leading timestamps.
VelocitySeries derive_velocity(const Trajectory& traj);

VelocitySeries apply_noise(const VelocitySeries& v, const NoiseProfile& profile);

// Integrates the sample-held velocity over [t_n, t_k]: each sample covers the
// interval up to its successor, so integrating between sample timestamps
// telescopes exactly to the displacement of the source trajectory.
std::pair<Vec2, double> integrate_window(const VelocitySeries& v, double t_n,
                                         double t_k);

struct SdmEntry {
  std::size_t n = 0;
  std::size_t k = 0;
  double d = 0.0;
  double weight = 0.0;
  std::uint32_t segment = 0;
};

struct SparseDistanceMatrix {
  std::vector<SdmEntry> entries;
  double window_s = 0.0;
  std::size_t stride = 0;
  std::string warning;  // non-empty when the result degenerated
};

// Anchors at n = 0, s, 2s, ...; entries to every later sample k with
// t_k - t_n < w, weighted beta = 1 - (t_k - t_n)/w.
SparseDistanceMatrix build_sparse_distance_matrix(const VelocitySeries& v,
                                                  double window_s,
                                                  std::size_t stride);

// Multi-segment variant: indices are offset into a shared dataset index
// space and entries never connect different segments.
void append_sdm_segment(SparseDistanceMatrix& sdm, const VelocitySeries& v,
                        std::uint32_t segment_id, std::size_t index_offset);

void save_sdm_csv(const std::string& path, const SparseDistanceMatrix& sdm,
                  std::optional<std::uint64_t> config_hash);
void save_sdm_binary(const std::string& path, const SparseDistanceMatrix& sdm,
                     std::optional<std::uint64_t> config_hash);
SparseDistanceMatrix load_sdm_binary(const std::string& path);

}  // namespace velochart
