// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "velochart/rng.hpp"
#include "velochart/transform.hpp"

using namespace velochart;
using Eigen::Matrix2Xd;

namespace {

constexpr double kPi = 3.141592653589793;

Matrix2Xd random_points(Rng& rng, int n, double scale) {
  Matrix2Xd pts(2, n);
  for (int i = 0; i < n; ++i)
    pts.col(i) = Vec2(rng.uniform(-scale, scale), rng.uniform(-scale, scale));
  return pts;
}

double mse(const Matrix2Xd& a, const Matrix2Xd& b) {
  return (a - b).colwise().squaredNorm().mean();
}

// smallest absolute angle equivalent to a
double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

}  // namespace

TEST_SUITE("transform") {

TEST_CASE("identity transform fixes every point") {
  Rng rng(1);
  const Matrix2Xd pts = random_points(rng, 20, 5.0);
  const LinearTransform id;
  CHECK((apply_transform(id, pts) - pts).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quarter turn moves the x axis onto the y axis") {
  LinearTransform tf;
  tf.phi = kPi / 2.0;
  Matrix2Xd p(2, 1);
  p.col(0) = Vec2(1.0, 0.0);
  const Matrix2Xd q = apply_transform(tf, p);
  CHECK(std::abs(q(0, 0) - 0.0) < 1e-12);
  CHECK(std::abs(q(1, 0) - 1.0) < 1e-12);
}

TEST_CASE("x flip followed by a half turn equals a y flip") {
  LinearTransform lhs;
  lhs.flip_x = true;
  lhs.phi = kPi;
  LinearTransform rhs;
  rhs.flip_y = true;

  Matrix2Xd p(2, 1);
  p.col(0) = Vec2(1.0, 2.0);
  const Matrix2Xd a = apply_transform(lhs, p);
  const Matrix2Xd b = apply_transform(rhs, p);
  CHECK(std::abs(a(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(a(1, 0) + 2.0) < 1e-12);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("the linear factor stays orthogonal") {
  for (const bool fx : {false, true}) {
    for (const bool fy : {false, true}) {
      LinearTransform tf;
      tf.phi = 0.83;
      tf.flip_x = fx;
      tf.flip_y = fy;
      const Eigen::Matrix2d m = tf.linear();
      CHECK((m.transpose() * m - Eigen::Matrix2d::Identity())
                .cwiseAbs()
                .maxCoeff() < 1e-12);
      const double want_det = (fx != fy) ? -1.0 : 1.0;
      CHECK(std::abs(m.determinant() - want_det) < 1e-12);
    }
  }
}

TEST_CASE("inverting a transform recovers the inputs") {
  Rng rng(2);
  const Matrix2Xd pts = random_points(rng, 40, 8.0);
  LinearTransform tf;
  tf.phi = 0.7;
  tf.t = Vec2(3.0, -2.0);
  tf.flip_x = true;
  const Matrix2Xd back = invert_transform(tf, apply_transform(tf, pts));
  CHECK((back - pts).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("aligning a chart to itself is the identity") {
  Rng rng(3);
  const Matrix2Xd pts = random_points(rng, 30, 4.0);
  const LinearTransform tf = least_squares_align(pts, pts);
  CHECK(std::abs(tf.phi) < 1e-9);
  CHECK(tf.t.norm() < 1e-9);
  CHECK_FALSE(tf.flip_x);
  CHECK_FALSE(tf.flip_y);
  CHECK(mse(apply_transform(tf, pts), pts) < 1e-18);
}

TEST_CASE("a quarter-turned chart aligns with the opposite angle") {
  Rng rng(4);
  const Matrix2Xd gt = random_points(rng, 25, 6.0);
  LinearTransform quarter;
  quarter.phi = kPi / 2.0;
  const Matrix2Xd chart = apply_transform(quarter, gt);

  const LinearTransform tf = least_squares_align(chart, gt);
  CHECK(std::abs(wrap_angle(tf.phi + kPi / 2.0)) < 1e-9);
  CHECK_FALSE(tf.flip_x);
  CHECK((apply_transform(tf, chart) - gt).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("a mirrored chart is fitted with a reflection") {
  Rng rng(5);
  const Matrix2Xd gt = random_points(rng, 25, 6.0);
  Matrix2Xd chart = gt;
  chart.row(0) *= -1.0;  // mirror across the y axis

  const LinearTransform tf = least_squares_align(chart, gt);
  CHECK(tf.flip_x);
  CHECK(std::abs(tf.linear().determinant() + 1.0) < 1e-12);
  CHECK((apply_transform(tf, chart) - gt).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("a full rigid motion is recovered exactly") {
  Rng rng(6);
  const Matrix2Xd chart = random_points(rng, 50, 5.0);
  LinearTransform truth;
  truth.phi = -2.1;
  truth.t = Vec2(-7.0, 11.5);
  truth.flip_y = true;
  const Matrix2Xd gt = apply_transform(truth, chart);

  const LinearTransform tf = least_squares_align(chart, gt);
  CHECK((apply_transform(tf, chart) - gt).cwiseAbs().maxCoeff() < 1e-9);
  // the fitted linear factor matches the generating one
  CHECK((tf.linear() - truth.linear()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((tf.t - truth.t).norm() < 1e-9);
}

TEST_CASE("the fit is no worse than the generating transform under noise") {
  Rng rng(7);
  const Matrix2Xd chart = random_points(rng, 60, 5.0);
  LinearTransform truth;
  truth.phi = 0.9;
  truth.t = Vec2(2.0, -1.0);
  Matrix2Xd gt = apply_transform(truth, chart);
  for (int i = 0; i < gt.cols(); ++i)
    gt.col(i) += Vec2(rng.normal() * 0.05, rng.normal() * 0.05);

  const LinearTransform tf = least_squares_align(chart, gt);
  CHECK(mse(apply_transform(tf, chart), gt) <=
        mse(apply_transform(truth, chart), gt) + 1e-12);
}

TEST_CASE("degenerate alignment inputs are rejected") {
  Matrix2Xd a(2, 3), b(2, 2);
  a.setRandom();
  b.setRandom();
  CHECK_THROWS_AS(least_squares_align(a, b), std::invalid_argument);

  Matrix2Xd single(2, 1);
  single.col(0) = Vec2(1.0, 1.0);
  CHECK_THROWS_AS(least_squares_align(single, single), std::invalid_argument);

  Matrix2Xd same(2, 4);
  same.colwise() = Vec2(2.0, 3.0);
  Matrix2Xd spread(2, 4);
  spread.setRandom();
  CHECK_THROWS_AS(least_squares_align(same, spread), std::invalid_argument);
}

}  // TEST_SUITE
