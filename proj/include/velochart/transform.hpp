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

#include "velochart/geometry.hpp"

namespace velochart {

// Rigid chart-to-world alignment: p' = R(phi) * F * p + t, where F mirrors
// the axes before the rotation. No scale, by design.
struct LinearTransform {
  Vec2 t = Vec2::Zero();
  double phi = 0.0;
  bool flip_x = false;
  bool flip_y = false;

  Eigen::Matrix2d linear() const;   // R(phi) * F
  Vec2 operator()(const Vec2& p) const { return linear() * p + t; }
};

// Applies tf to every column of pts.
Eigen::Matrix2Xd apply_transform(const LinearTransform& tf,
                                 const Eigen::Matrix2Xd& pts);

// Undoes tf: apply_transform(tf, invert(tf, pts)) returns pts.
Eigen::Matrix2Xd invert_transform(const LinearTransform& tf,
                                  const Eigen::Matrix2Xd& pts);

// Closed-form orthogonal Procrustes fit (rotation plus optional reflection
// plus translation) minimizing the mean squared distance between the
// transformed chart and the ground truth. The upper-bound alignment baseline.
LinearTransform least_squares_align(const Eigen::Matrix2Xd& chart,
                                    const Eigen::Matrix2Xd& ground_truth);

}  // namespace velochart
