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

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "velochart/environment.hpp"
#include "velochart/geometry.hpp"

namespace velochart {

// Boolean floor plan on a uniform cell grid. Row 0 is the bottom row in
// world coordinates; image loaders flip accordingly.
struct OccupancyGrid {
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> cells;  // 1 = free
  double cell_size_m = 1.0;
  Vec2 origin = Vec2::Zero();  // world position of the lower-left corner

  Eigen::Index rows() const { return cells.rows(); }
  Eigen::Index cols() const { return cells.cols(); }
  bool free_at(Eigen::Index r, Eigen::Index c) const { return cells(r, c) != 0; }
  Vec2 cell_center(Eigen::Index r, Eigen::Index c) const {
    return origin + Vec2((static_cast<double>(c) + 0.5) * cell_size_m,
                         (static_cast<double>(r) + 0.5) * cell_size_m);
  }
  Eigen::Index free_count() const;
};

// Discrete target distribution over the floor plan: world-frame points with
// trainable logits, q = softmax(logits).
struct MapDistribution {
  Eigen::Matrix2Xd points;
  Eigen::VectorXd logits;

  Eigen::Index size() const { return points.cols(); }
  Eigen::VectorXd probabilities() const;
};

// Draws n_samples points uniformly over the free area (cell picked uniformly
// among free cells, position uniform within the cell) with constant logits.
// Exact duplicate points are rejected and redrawn.
MapDistribution map_from_grid(const OccupancyGrid& grid, int n_samples,
                              std::uint64_t seed);

// Cell centers classified by Environment::accessible; ignore_obstacles keeps
// only the outer bounds, the knob behind obstacle-blind matching runs.
OccupancyGrid rasterize_environment(const Environment& env, double cell_size_m,
                                    bool ignore_obstacles = false);

// Image + sidecar io. Images follow the dark-is-blocked convention with a
// fixed threshold: luminance below 128 blocks the cell. The sidecar is JSON
// {"cell_size_m": ..., "origin": [x, y]}.
OccupancyGrid load_occupancy(const std::string& image_path,
                             const std::string& sidecar_path);
void save_occupancy(const std::string& pgm_path, const std::string& sidecar_path,
                    const OccupancyGrid& grid);

// Decoders behind load_occupancy, exposed for direct use: 8-bit PGM (P2/P5)
// and 8-bit PNG (gray, RGB, palette, with or without alpha; no interlacing).
// Returned matrix holds luminance with row 0 at the bottom.
Eigen::MatrixXd load_pgm(const std::string& path);
Eigen::MatrixXd load_png(const std::string& path);

// Learned q export for heatmap rendering: "x,y,probability" rows.
void export_map_csv(const std::string& path, const MapDistribution& map);

}  // namespace velochart
