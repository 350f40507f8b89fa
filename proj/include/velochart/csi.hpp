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
#include <vector>

#include "velochart/environment.hpp"

namespace velochart {

enum class PaddingMode { pre_synchronized, tdoa_padded };

// One channel measurement: linear power per delay bin, one row per base
// station. arrival_offsets holds the first-arrival bin of each row and is
// consumed by tdoa_pad; it is empty for imported data.
struct CsiTensor {
  Eigen::MatrixXd grid;  // N_A x L_w
  std::vector<int> arrival_offsets;

  Eigen::Index antennas() const { return grid.rows(); }
  Eigen::Index bins() const { return grid.cols(); }
};

// Direct path plus one bounce per scatterer. Delay = path length / c on bins
// of width 1/bandwidth, power falls off as 1/d^2 (clamped below min_path_m),
// every blocked leg multiplies by the NLoS attenuation, and each path lands
// as a triangular two-bin pulse. A constant noise floor is added last.
CsiTensor synthesize_csi(const Environment& env, const Vec2& position);

CsiTensor tdoa_pad(const CsiTensor& csi, PaddingMode mode);

constexpr double kSpeedOfLight = 299792458.0;

}  // namespace velochart
