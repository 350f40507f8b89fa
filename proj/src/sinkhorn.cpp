// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/sinkhorn.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace velochart {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// log-sum-exp down each column of m
RowVectorXd lse_cols(const MatrixXd& m) {
  const RowVectorXd mx = m.colwise().maxCoeff();
  return mx.array() +
         (m.rowwise() - mx).array().exp().colwise().sum().log();
}

// log-sum-exp across each row of m
VectorXd lse_rows(const MatrixXd& m) {
  const VectorXd mx = m.rowwise().maxCoeff();
  return mx.array() +
         (m.colwise() - mx).array().exp().rowwise().sum().log();
}

// The scaled kernel must keep at least one representable entry per row and
// column once exponentiated, otherwise diag(a) K diag(b) degenerates.
void check_kernel(const MatrixXd& M) {
  if (!M.allFinite())
    throw std::runtime_error(
        "transport kernel overflows, reduce lambda or rescale the costs");
  const double floor = -700.0;  // exp() underflows to zero near -745
  if ((M.rowwise().maxCoeff().array() < floor).any() ||
      (M.colwise().maxCoeff().array() < floor).any())
    throw std::runtime_error(
        "transport kernel underflows to an all-zero row or column, reduce "
        "lambda or rescale the costs");
}

MatrixXd plan_from(const MatrixXd& M, const VectorXd& f, const VectorXd& g) {
  return (((M.colwise() + f).rowwise() + g.transpose()).array().exp()).matrix();
}

}  // namespace

TransportPlan sinkhorn(const MatrixXd& C, const VectorXd& p, const VectorXd& q,
                       double lambda, int max_iters, double tol) {
  if (C.rows() != p.size() || C.cols() != q.size())
    throw std::invalid_argument("cost matrix does not match the marginals");
  if (!C.allFinite() || C.minCoeff() < 0.0)
    throw std::invalid_argument("cost matrix must be finite and non-negative");
  if (p.minCoeff() <= 0.0 || q.minCoeff() <= 0.0 ||
      std::abs(p.sum() - 1.0) > 1e-9 || std::abs(q.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("marginals must be strictly positive and sum to one");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (max_iters < 1) throw std::invalid_argument("need at least one iteration");

  const MatrixXd M = -lambda * C;
  check_kernel(M);
  const VectorXd lp = p.array().log();
  const VectorXd lq = q.array().log();

  VectorXd f = VectorXd::Zero(p.size());
  VectorXd g = VectorXd::Zero(q.size());
  TransportPlan plan;
  plan.lambda = lambda;
  for (int it = 1; it <= max_iters; ++it) {
    f = lp - lse_rows(M.rowwise() + g.transpose());
    g = lq - lse_cols(M.colwise() + f).transpose();
    plan.T = plan_from(M, f, g);
    const double row_err = (plan.T.rowwise().sum() - p).cwiseAbs().maxCoeff();
    const double col_err =
        (plan.T.colwise().sum().transpose() - q).cwiseAbs().maxCoeff();
    plan.iterations = it;
    plan.residual = std::max(row_err, col_err);
    if (plan.residual <= tol) break;
  }
  plan.C = C;
  plan.a = f.array().exp();
  plan.b = g.array().exp();
  return plan;
}

SinkhornLoss sinkhorn_loss(const Eigen::Matrix2Xd& chart_batch,
                           const MapDistribution& map, const LinearTransform& tf,
                           double lambda, int iters, bool with_grad) {
  const Index bsz = chart_batch.cols();
  const Index n = map.size();
  if (bsz < 2)
    throw std::invalid_argument("sinkhorn loss needs at least two chart points");
  if (n < 2) throw std::invalid_argument("map distribution is too small");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (iters < 1) throw std::invalid_argument("need at least one iteration");

  const Eigen::Matrix2Xd moved = apply_transform(tf, chart_batch);

  MatrixXd C(bsz, n);
  for (Index j = 0; j < n; ++j)
    C.col(j) = (moved.colwise() - Vec2(map.points.col(j))).colwise().norm();

  const MatrixXd M = -lambda * C;
  check_kernel(M);
  const double lp = -std::log(static_cast<double>(bsz));  // uniform source
  const VectorXd lq_full = map.logits.array() - map.logits.maxCoeff();
  const VectorXd lq =
      lq_full.array() - std::log(lq_full.array().exp().sum());

  // fixed unroll, potentials of every iteration kept for the reverse sweep
  std::vector<VectorXd> fs(static_cast<std::size_t>(iters) + 1);
  std::vector<VectorXd> gs(static_cast<std::size_t>(iters) + 1);
  fs[0] = VectorXd::Zero(bsz);
  for (int k = 1; k <= iters; ++k) {
    gs[static_cast<std::size_t>(k)] =
        lq - lse_cols(M.colwise() + fs[static_cast<std::size_t>(k - 1)]).transpose();
    fs[static_cast<std::size_t>(k)] =
        (lp - lse_rows(M.rowwise() +
                       gs[static_cast<std::size_t>(k)].transpose()).array())
            .matrix();
  }
  const VectorXd& f = fs[static_cast<std::size_t>(iters)];
  const VectorXd& g = gs[static_cast<std::size_t>(iters)];
  const MatrixXd T = plan_from(M, f, g);

  SinkhornLoss out;
  out.value = (T.array() * C.array()).sum();
  out.T = T;
  out.d_logits = VectorXd::Zero(n);
  if (!with_grad) return out;

  // reverse sweep: dM accumulates across iterations, dC starts with the
  // direct <T, C> term
  const MatrixXd tc = T.array() * C.array();
  MatrixXd dM = tc;
  MatrixXd dC = T;
  VectorXd df = tc.rowwise().sum();
  VectorXd dg = tc.colwise().sum().transpose();
  VectorXd dlq = VectorXd::Zero(n);
  MatrixXd scratch(bsz, n);

  for (int k = iters; k >= 1; --k) {
    const VectorXd& gk = gs[static_cast<std::size_t>(k)];
    const VectorXd& fk = fs[static_cast<std::size_t>(k)];
    const VectorXd& fprev = fs[static_cast<std::size_t>(k - 1)];

    // f_k = lp - lse_rows(M + g_k): the row softmax scaled by upstream df
    scratch =
        (((M.rowwise() + gk.transpose()).colwise() + (fk.array() - lp).matrix())
             .array()
             .exp()
             .colwise() *
         df.array())
            .matrix();
    dM -= scratch;
    dg -= scratch.colwise().sum().transpose();

    // g_k = lq - lse_cols(M + f_{k-1}): the column softmax scaled by dg
    scratch = (((M.colwise() + fprev).rowwise() + (gk - lq).transpose())
                   .array()
                   .exp()
                   .rowwise() *
               dg.transpose().array())
                  .matrix();
    dM -= scratch;
    dlq += dg;
    df = -scratch.rowwise().sum();
    dg.setZero();
  }

  dC -= lambda * dM;

  // softmax of the logits: d logit = dlq - q * sum(dlq)
  const VectorXd qv = lq.array().exp();
  out.d_logits = dlq - qv * dlq.sum();

  // cost rows are Euclidean distances from each transformed chart point
  const double c = std::cos(tf.phi), s = std::sin(tf.phi);
  Eigen::Matrix2d dr;
  dr << -s, -c, c, -s;
  if (tf.flip_x) dr.col(0) *= -1.0;
  if (tf.flip_y) dr.col(1) *= -1.0;
  out.d_points.setZero(2, bsz);
  for (Index i = 0; i < bsz; ++i) {
    Vec2 dx = Vec2::Zero();
    for (Index j = 0; j < n; ++j) {
      const double dist = C(i, j);
      if (dist > 0.0)
        dx += (dC(i, j) / dist) * (Vec2(moved.col(i)) - Vec2(map.points.col(j)));
    }
    out.d_points.col(i) = dx;
    out.d_t += dx;
    out.d_phi += dx.dot(dr * Vec2(chart_batch.col(i)));
  }
  return out;
}

}  // namespace velochart
