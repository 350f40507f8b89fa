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
#include <algorithm>
#include <cmath>

namespace velochart {

using Vec2 = Eigen::Vector2d;

struct Rect {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{0.0, 0.0};

  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  Vec2 center() const { return 0.5 * (lo + hi); }
  double diagonal() const { return (hi - lo).norm(); }

  bool contains(const Vec2& p, double margin = 0.0) const {
    return p.x() >= lo.x() + margin && p.x() <= hi.x() - margin &&
           p.y() >= lo.y() + margin && p.y() <= hi.y() - margin;
  }

  bool contains_interior(const Vec2& p) const {
    return p.x() > lo.x() && p.x() < hi.x() && p.y() > lo.y() && p.y() < hi.y();
  }
};

// True when the segment from a to b passes through the open interior of r.
// Runs the Liang-Barsky slab clip; touching a face or sliding along an edge
// does not count as an intersection.
inline bool segment_intersects_rect(const Vec2& a, const Vec2& b, const Rect& r) {
  double t0 = 0.0;
  double t1 = 1.0;
  const Vec2 d = b - a;
  for (int ax = 0; ax < 2; ++ax) {
    if (std::abs(d[ax]) < 1e-300) {
      if (a[ax] <= r.lo[ax] || a[ax] >= r.hi[ax]) return false;
    } else {
      double ta = (r.lo[ax] - a[ax]) / d[ax];
      double tb = (r.hi[ax] - a[ax]) / d[ax];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 >= t1) return false;
    }
  }
  return true;
}

inline Eigen::Matrix2d rotation2d(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Eigen::Matrix2d m;
  m << c, -s, s, c;
  return m;
}

}  // namespace velochart
