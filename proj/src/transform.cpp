// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/transform.hpp"

#include <cmath>
#include <stdexcept>

namespace velochart {

Eigen::Matrix2d LinearTransform::linear() const {
  const double c = std::cos(phi), s = std::sin(phi);
  Eigen::Matrix2d m;
  m << c, -s, s, c;
  if (flip_x) m.col(0) *= -1.0;
  if (flip_y) m.col(1) *= -1.0;
  return m;
}

Eigen::Matrix2Xd apply_transform(const LinearTransform& tf,
                                 const Eigen::Matrix2Xd& pts) {
  return (tf.linear() * pts).colwise() + tf.t;
}

Eigen::Matrix2Xd invert_transform(const LinearTransform& tf,
                                  const Eigen::Matrix2Xd& pts) {
  // the linear factor is orthogonal, so its transpose inverts it
  const Eigen::Matrix2d m = tf.linear();
  return m.transpose() * (pts.colwise() - tf.t);
}

LinearTransform least_squares_align(const Eigen::Matrix2Xd& chart,
                                    const Eigen::Matrix2Xd& ground_truth) {
  if (chart.cols() != ground_truth.cols())
    throw std::invalid_argument("chart and ground truth differ in length");
  if (chart.cols() < 2)
    throw std::invalid_argument("alignment needs at least two points");

  const Vec2 cx = chart.rowwise().mean();
  const Vec2 cy = ground_truth.rowwise().mean();
  const Eigen::Matrix2Xd xc = chart.colwise() - cx;
  const Eigen::Matrix2Xd yc = ground_truth.colwise() - cy;
  if (xc.norm() == 0.0 || yc.norm() == 0.0)
    throw std::invalid_argument("alignment is degenerate, all points coincide");

  // orthogonal factor of the cross-covariance, reflections allowed
  const Eigen::Matrix2d h = yc * xc.transpose();
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix2d q = svd.matrixU() * svd.matrixV().transpose();

  LinearTransform tf;
  if (q.determinant() < 0.0) {
    // q = R(phi) * diag(-1, 1): peel the mirror off to recover the angle
    tf.flip_x = true;
    Eigen::Matrix2d r = q;
    r.col(0) *= -1.0;
    tf.phi = std::atan2(r(1, 0), r(0, 0));
  } else {
    tf.phi = std::atan2(q(1, 0), q(0, 0));
  }
  tf.t = cy - q * cx;
  return tf;
}

}  // namespace velochart
