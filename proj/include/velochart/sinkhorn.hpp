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

#include "velochart/mapdist.hpp"
#include "velochart/transform.hpp"

namespace velochart {

// Entropy-regularized transport plan between discrete distributions p and q.
// The kernel convention is K = exp(-lambda * C): larger lambda means sharper
// plans, the limit lambda -> 0 recovers the independent coupling p q^T.
struct TransportPlan {
  Eigen::MatrixXd T;  // s x t, non-negative, row sums p, column sums q
  Eigen::MatrixXd C;
  Eigen::VectorXd a, b;  // T = diag(a) * exp(-lambda C) * diag(b)
  double lambda = 0.0;
  int iterations = 0;
  double residual = 0.0;  // max marginal violation at the final iterate
};

// Log-domain Sinkhorn-Knopp: alternates the scaling updates until the worst
// marginal error drops to tol or max_iters is reached. C must be finite and
// non-negative, p and q strictly positive and summing to one.
TransportPlan sinkhorn(const Eigen::MatrixXd& C, const Eigen::VectorXd& p,
                       const Eigen::VectorXd& q, double lambda,
                       int max_iters = 1000, double tol = 1e-6);

// Transport cost <T, C> of a fixed-length unrolled Sinkhorn run between a
// transformed chart batch (uniform p) and the map distribution, with exact
// reverse-mode gradients through every iteration and the softmax over the
// map logits.
struct SinkhornLoss {
  double value = 0.0;
  Vec2 d_t = Vec2::Zero();
  double d_phi = 0.0;
  Eigen::VectorXd d_logits;
  Eigen::Matrix2Xd d_points;  // gradient per transformed chart point
  Eigen::MatrixXd T;          // the plan the loss was read from
};

SinkhornLoss sinkhorn_loss(const Eigen::Matrix2Xd& chart_batch,
                           const MapDistribution& map,
                           const LinearTransform& tf, double lambda,
                           int iters = 50, bool with_grad = true);

}  // namespace velochart
