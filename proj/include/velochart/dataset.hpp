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
#include <optional>
#include <string>
#include <vector>

#include "velochart/csi.hpp"

namespace velochart {

// A recorded segment: CSI samples at a fixed rate, optional ground truth.
struct Dataset {
  std::size_t n_antennas = 0;
  std::size_t n_bins = 0;
  double rate_hz = 0.0;
  std::vector<Eigen::MatrixXd> csi;
  std::vector<double> timestamps;
  std::vector<Vec2> positions;  // empty when ground truth absent

  std::size_t size() const { return csi.size(); }
  bool has_positions() const { return !positions.empty(); }

  struct SpeedStats {
    double mean = 0.0;
    double stddev = 0.0;
  };
  SpeedStats speed_stats() const;
};

// Several independent recordings addressed through one index space.
// Windowed operations must not connect samples across segment borders.
struct SegmentedDataset {
  std::vector<Dataset> segments;

  std::size_t total_samples() const;
  std::size_t segment_start(std::size_t segment) const;
  // maps a global sample index to (segment, local index)
  std::pair<std::size_t, std::size_t> locate(std::size_t global) const;
  const Eigen::MatrixXd& csi_at(std::size_t global) const;
  const Vec2& position_at(std::size_t global) const;
  bool all_have_positions() const;
};

// Binary container: "CCDS" header {version u32, N_A u32, L_w u32, count u64,
// rate_hz f64}, row-major f32 grids, f64 timestamps, u32 position flag plus
// f64 pairs when set. Files written here append a "CCFG" u64 trailer carrying
// the producing config hash; imported files without the trailer load fine.
void save_dataset(const std::string& path, const Dataset& ds,
                  std::optional<std::uint64_t> config_hash);

struct LoadedDataset {
  Dataset data;
  std::optional<std::uint64_t> config_hash;
};
LoadedDataset load_dataset(const std::string& path);

}  // namespace velochart
