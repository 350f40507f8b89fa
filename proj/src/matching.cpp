// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/matching.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "velochart/common.hpp"
#include "velochart/network.hpp"
#include "velochart/rng.hpp"

namespace velochart {

namespace {

using Eigen::Index;
using Eigen::Matrix2Xd;
using Eigen::VectorXd;

constexpr double kTau = 6.283185307179586;

std::uint64_t hash_bytes(const VectorXd& v) {
  return fnv1a64(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

void check_schedule(const MatchSchedule& s) {
  if (s.i_iter < 1 || s.i_wt < 1 || s.i_wt >= s.i_wl)
    throw std::invalid_argument(
        "schedule must order the gates as i_wt < i_wl and run i_iter >= 1");
  if (s.i_wt >= s.i_iter)
    throw std::invalid_argument("rotation gate i_wt must open before i_iter");
  if (!(s.lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (s.batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
  if (s.restart_rotations < 1)
    throw std::invalid_argument("need at least one start rotation");
  if (s.sinkhorn_iters < 1 || s.eval_cap < 2 || s.refit_epochs < 0)
    throw std::invalid_argument("bad schedule limits");
}

struct Variant {
  LinearTransform tf;
  VectorXd logits;
  AdamState adam_tf, adam_logits;
};

// one staged optimization epoch over shuffled batches; returns the mean loss
double run_epoch(Variant& var, const Matrix2Xd& chart, const MapDistribution& map,
                 const MatchSchedule& sched, double lr_scale, bool update_phi,
                 bool update_logits, Rng& rng, std::vector<std::size_t>& order) {
  MapDistribution live;
  live.points = map.points;

  rng.shuffle(order);
  const std::size_t n = order.size();
  const auto bsz = static_cast<std::size_t>(sched.batch_size);
  double loss_sum = 0.0;
  std::size_t seen = 0;

  for (std::size_t start = 0; start < n; start += bsz) {
    std::size_t stop = std::min(n, start + bsz);
    if (stop - start < 2) break;  // a lone trailing point cannot form a plan
    Matrix2Xd batch(2, static_cast<Index>(stop - start));
    for (std::size_t i = start; i < stop; ++i)
      batch.col(static_cast<Index>(i - start)) = chart.col(static_cast<Index>(order[i]));

    live.logits = var.logits;
    const SinkhornLoss loss = sinkhorn_loss(batch, live, var.tf, sched.lambda,
                                            sched.sinkhorn_iters, true);
    loss_sum += loss.value * static_cast<double>(stop - start);
    seen += stop - start;

    VectorXd tp(3);
    tp << var.tf.t.x(), var.tf.t.y(), var.tf.phi;
    VectorXd tg(3);
    tg << loss.d_t.x(), loss.d_t.y(), update_phi ? loss.d_phi : 0.0;
    adam_step(tp, tg, var.adam_tf, lr_scale * sched.lr_transform);
    var.tf.t = Vec2(tp[0], tp[1]);
    var.tf.phi = tp[2];

    if (update_logits)
      adam_step(var.logits, loss.d_logits, var.adam_logits,
                lr_scale * sched.lr_logits);
  }
  return seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
}

double score(const Matrix2Xd& eval_chart, const MapDistribution& map,
             const VectorXd& logits, const LinearTransform& tf,
             const MatchSchedule& sched) {
  MapDistribution scored;
  scored.points = map.points;
  scored.logits = logits;
  return sinkhorn_loss(eval_chart, scored, tf, sched.lambda,
                       sched.sinkhorn_iters, false)
      .value;
}

}  // namespace

MatchResult match_map(const Matrix2Xd& chart, const MapDistribution& map,
                      const MatchSchedule& sched, std::uint64_t seed) {
  check_schedule(sched);
  if (chart.cols() < 2) throw std::invalid_argument("chart is too small to match");
  const Vec2 spread = chart.rowwise().maxCoeff() - chart.rowwise().minCoeff();
  if (!(spread.x() > 0.0) || !(spread.y() > 0.0))
    throw std::invalid_argument("degenerate chart, no spread along an axis");
  if (map.size() < 2) throw std::invalid_argument("map distribution is too small");

  const Vec2 chart_centroid = chart.rowwise().mean();
  const Vec2 map_centroid = map.points.rowwise().mean();

  // shared scoring subset keeps the restart comparison fair
  Matrix2Xd eval_chart;
  {
    std::vector<std::size_t> idx(static_cast<std::size_t>(chart.cols()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x65766173));
    rng.shuffle(idx);
    const auto keep = std::min<std::size_t>(
        idx.size(), static_cast<std::size_t>(sched.eval_cap));
    eval_chart.resize(2, static_cast<Index>(keep));
    for (std::size_t i = 0; i < keep; ++i)
      eval_chart.col(static_cast<Index>(i)) = chart.col(static_cast<Index>(idx[i]));
  }

  MatchResult result;
  const int flips = sched.try_flips ? 3 : 1;
  std::uint64_t variant_id = 0;
  LinearTransform best_tf;
  VectorXd best_logits;
  double best_lm = std::numeric_limits<double>::infinity();

  for (int fi = 0; fi < flips; ++fi) {
    for (int ri = 0; ri < sched.restart_rotations; ++ri, ++variant_id) {
      Variant var;
      var.tf.phi = kTau * static_cast<double>(ri) /
                   static_cast<double>(sched.restart_rotations);
      var.tf.flip_x = fi == 1;
      var.tf.flip_y = fi == 2;
      var.tf.t = map_centroid - var.tf.linear() * chart_centroid;
      var.logits = map.logits;

      RestartRecord rec;
      rec.start_rotation = var.tf.phi;
      rec.flip = fi;
      rec.trace.reserve(static_cast<std::size_t>(sched.i_iter));

      Rng rng(derive_seed(seed, 0xa11c0000 + variant_id));
      std::vector<std::size_t> order(static_cast<std::size_t>(chart.cols()));
      std::iota(order.begin(), order.end(), std::size_t{0});

      for (int epoch = 1; epoch <= sched.i_iter; ++epoch) {
        const double mean_lm =
            run_epoch(var, chart, map, sched, 1.0, epoch > sched.i_wt,
                      epoch > sched.i_wl, rng, order);
        rec.trace.push_back(
            {var.tf.phi, var.tf.t, hash_bytes(var.logits), mean_lm});
      }

      rec.transform = var.tf;
      rec.final_lm = score(eval_chart, map, var.logits, var.tf, sched);
      if (rec.final_lm < best_lm) {
        best_lm = rec.final_lm;
        best_tf = var.tf;
        best_logits = var.logits;
      }
      result.restarts.push_back(std::move(rec));
    }
  }
  result.best_lm = best_lm;

  // polish the winner on the full chart; a map gate that never opened during
  // the main run stays closed so a frozen distribution stays frozen
  Variant var;
  var.tf = best_tf;
  var.logits = best_logits;
  const bool logits_ever_open = sched.i_wl < sched.i_iter;

  Rng rng(derive_seed(seed, 0x5ef17000));
  std::vector<std::size_t> order(static_cast<std::size_t>(chart.cols()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= sched.refit_epochs; ++epoch)
    run_epoch(var, chart, map, sched, 0.2, true, logits_ever_open, rng, order);

  result.transform = var.tf;
  result.learned_map.points = map.points;
  result.learned_map.logits = var.logits;
  result.refit_lm = score(eval_chart, map, var.logits, var.tf, sched);
  return result;
}

}  // namespace velochart
