// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "velochart/geometry.hpp"
#include "velochart/matching.hpp"
#include "velochart/rng.hpp"
#include "velochart/transform.hpp"

using namespace velochart;
using Eigen::Matrix2Xd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = 3.141592653589793;

// smallest absolute angle equivalent to a
double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

// asymmetric point cloud so rotations and flips cannot alias each other
Matrix2Xd scatter_cloud(std::uint64_t seed, int n, double w, double h) {
  Rng rng(seed);
  Matrix2Xd pts(2, n);
  for (int i = 0; i < n; ++i)
    pts.col(i) = Vec2(rng.uniform(0.0, w), rng.uniform(0.0, h));
  return pts;
}

MapDistribution cloud_map(const Matrix2Xd& pts) {
  MapDistribution map;
  map.points = pts;
  map.logits = VectorXd::Zero(pts.cols());
  return map;
}

MatchSchedule quick_schedule() {
  MatchSchedule s;
  s.i_iter = 30;
  s.i_wt = 5;
  s.i_wl = 60;  // past i_iter, the map distribution stays frozen
  s.lambda = 5.0;
  s.batch_size = 3000;
  s.restart_rotations = 8;
  s.sinkhorn_iters = 25;
  s.refit_epochs = 20;
  return s;
}

double mean_residual(const LinearTransform& got, const Matrix2Xd& chart,
                     const Matrix2Xd& target) {
  return (apply_transform(got, chart) - target).colwise().norm().mean();
}

bool same_transform(const LinearTransform& a, const LinearTransform& b) {
  return std::memcmp(a.t.data(), b.t.data(), 2 * sizeof(double)) == 0 &&
         std::memcmp(&a.phi, &b.phi, sizeof(double)) == 0 &&
         a.flip_x == b.flip_x && a.flip_y == b.flip_y;
}

}  // namespace

TEST_SUITE("matching") {

TEST_CASE("a rotated and shifted chart is matched back onto its map") {
  const Matrix2Xd world = scatter_cloud(71, 30, 8.0, 5.0);
  const MapDistribution map = cloud_map(world);

  LinearTransform truth;
  truth.phi = 0.6458;  // 37 degrees
  truth.t = Vec2(3.0, -2.0);
  const Matrix2Xd chart = invert_transform(truth, world);

  const MatchResult res = match_map(chart, map, quick_schedule(), 9);
  CHECK(mean_residual(res.transform, chart, world) <= 0.1);
  CHECK(res.refit_lm <= res.best_lm + 1e-9);
}

TEST_CASE("an already aligned chart stays put") {
  const Matrix2Xd world = scatter_cloud(72, 30, 8.0, 5.0);
  const MapDistribution map = cloud_map(world);

  const MatchResult res = match_map(world, map, quick_schedule(), 10);
  CHECK(!res.transform.flip_x);
  CHECK(!res.transform.flip_y);
  CHECK(std::abs(wrap_angle(res.transform.phi)) <= 0.01);
  CHECK(res.transform.t.norm() <= 0.05);
}

TEST_CASE("the reported best equals the minimum over restarts") {
  const Matrix2Xd world = scatter_cloud(73, 20, 6.0, 4.0);
  const MapDistribution map = cloud_map(world);
  MatchSchedule sched = quick_schedule();
  sched.i_iter = 8;
  sched.i_wt = 2;
  sched.restart_rotations = 4;
  sched.refit_epochs = 5;

  const MatchResult res = match_map(world, map, sched, 11);
  REQUIRE(res.restarts.size() == 12);  // 4 rotations times {none, x, y}
  double lo = res.restarts[0].final_lm;
  for (const auto& rec : res.restarts) lo = std::min(lo, rec.final_lm);
  CHECK(res.best_lm == lo);

  // flip-major enumeration with evenly spaced start angles
  for (int fi = 0; fi < 3; ++fi)
    for (int ri = 0; ri < 4; ++ri) {
      const auto& rec = res.restarts[static_cast<std::size_t>(fi * 4 + ri)];
      CHECK(rec.flip == fi);
      CHECK(rec.start_rotation ==
            doctest::Approx(2.0 * kPi * ri / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("gates hold their parameter groups frozen until they open") {
  const Matrix2Xd chart = scatter_cloud(74, 24, 5.0, 5.0);
  const MapDistribution map = cloud_map(scatter_cloud(75, 16, 6.0, 4.0));
  MatchSchedule sched;
  sched.i_iter = 8;
  sched.i_wt = 2;
  sched.i_wl = 5;
  sched.lambda = 3.0;
  sched.batch_size = 16;
  sched.restart_rotations = 2;
  sched.try_flips = false;
  sched.sinkhorn_iters = 20;
  sched.refit_epochs = 0;

  const MatchResult res = match_map(chart, map, sched, 12);
  REQUIRE(res.restarts.size() == 2);
  for (const auto& rec : res.restarts) {
    REQUIRE(rec.trace.size() == 8);
    const std::uint64_t frozen = rec.trace[0].logits_hash;
    for (int e = 0; e < 8; ++e) {
      if (e < sched.i_wt)
        CHECK(rec.trace[static_cast<std::size_t>(e)].phi == rec.start_rotation);
      if (e < sched.i_wl)
        CHECK(rec.trace[static_cast<std::size_t>(e)].logits_hash == frozen);
    }
    // once open, both groups actually move
    CHECK(rec.trace[2].phi != rec.trace[1].phi);
    CHECK(rec.trace[5].logits_hash != frozen);
    // translation moves from the first epoch
    CHECK((rec.trace[1].t - rec.trace[0].t).norm() > 0.0);
  }
}

TEST_CASE("pushing the map gate past the last epoch freezes the distribution") {
  const Matrix2Xd chart = scatter_cloud(76, 20, 5.0, 5.0);
  const MapDistribution map = cloud_map(scatter_cloud(77, 12, 6.0, 4.0));
  MatchSchedule sched;
  sched.i_iter = 6;
  sched.i_wt = 2;
  sched.i_wl = 100;
  sched.lambda = 3.0;
  sched.batch_size = 3000;
  sched.restart_rotations = 3;
  sched.try_flips = false;
  sched.sinkhorn_iters = 20;
  sched.refit_epochs = 3;  // the polish pass must not reopen the gate

  const MatchResult res = match_map(chart, map, sched, 13);
  for (const auto& rec : res.restarts) {
    const std::uint64_t frozen = rec.trace[0].logits_hash;
    for (const auto& log : rec.trace) CHECK(log.logits_hash == frozen);
  }
  CHECK(res.learned_map.logits.isZero(0.0));
}

TEST_CASE("matching is reproducible for a fixed seed") {
  const Matrix2Xd chart = scatter_cloud(78, 26, 5.0, 5.0);
  const MapDistribution map = cloud_map(scatter_cloud(79, 14, 6.0, 4.0));
  MatchSchedule sched;
  sched.i_iter = 6;
  sched.i_wt = 2;
  sched.i_wl = 4;
  sched.lambda = 3.0;
  sched.batch_size = 16;  // two uneven batches so the shuffle matters
  sched.restart_rotations = 3;
  sched.try_flips = false;
  sched.sinkhorn_iters = 15;
  sched.refit_epochs = 4;

  const MatchResult a = match_map(chart, map, sched, 21);
  const MatchResult b = match_map(chart, map, sched, 21);
  CHECK(same_transform(a.transform, b.transform));
  CHECK(a.best_lm == b.best_lm);
  CHECK(a.refit_lm == b.refit_lm);
  REQUIRE(a.learned_map.logits.size() == b.learned_map.logits.size());
  CHECK(std::memcmp(a.learned_map.logits.data(), b.learned_map.logits.data(),
                    sizeof(double) *
                        static_cast<std::size_t>(a.learned_map.logits.size())) == 0);
  REQUIRE(a.restarts.size() == b.restarts.size());
  for (std::size_t r = 0; r < a.restarts.size(); ++r)
    CHECK(a.restarts[r].final_lm == b.restarts[r].final_lm);

  const MatchResult c = match_map(chart, map, sched, 22);
  bool differs = false;
  for (std::size_t r = 0; r < a.restarts.size() && !differs; ++r)
    for (std::size_t e = 0; e < a.restarts[r].trace.size() && !differs; ++e)
      differs = a.restarts[r].trace[e].mean_lm != c.restarts[r].trace[e].mean_lm;
  CHECK(differs);
}

TEST_CASE("degenerate charts and malformed schedules are rejected") {
  const MapDistribution map = cloud_map(scatter_cloud(80, 10, 6.0, 4.0));
  const MatchSchedule good = quick_schedule();

  Matrix2Xd flat(2, 3);
  flat << 1.0, 1.0, 1.0, 0.0, 2.0, 5.0;  // no spread along x
  CHECK_THROWS_WITH_AS(match_map(flat, map, good, 1),
                       doctest::Contains("degenerate"), std::invalid_argument);

  Matrix2Xd lone(2, 1);
  lone.col(0) = Vec2(0.0, 0.0);
  CHECK_THROWS_AS(match_map(lone, map, good, 1), std::invalid_argument);

  const Matrix2Xd chart = scatter_cloud(81, 8, 5.0, 5.0);
  MapDistribution tiny;
  tiny.points = chart.leftCols(1);
  tiny.logits = VectorXd::Zero(1);
  CHECK_THROWS_AS(match_map(chart, tiny, good, 1), std::invalid_argument);

  MatchSchedule bad = good;
  bad.i_wt = bad.i_wl;  // gate order violated
  CHECK_THROWS_AS(match_map(chart, map, bad, 1), std::invalid_argument);

  bad = good;
  bad.i_wt = bad.i_iter;  // rotation gate never opens
  CHECK_THROWS_WITH_AS(match_map(chart, map, bad, 1),
                       doctest::Contains("rotation gate"), std::invalid_argument);

  bad = good;
  bad.lambda = 0.0;
  CHECK_THROWS_AS(match_map(chart, map, bad, 1), std::invalid_argument);
  bad = good;
  bad.batch_size = 1;
  CHECK_THROWS_AS(match_map(chart, map, bad, 1), std::invalid_argument);
  bad = good;
  bad.restart_rotations = 0;
  CHECK_THROWS_AS(match_map(chart, map, bad, 1), std::invalid_argument);
  bad = good;
  bad.refit_epochs = -1;
  CHECK_THROWS_AS(match_map(chart, map, bad, 1), std::invalid_argument);
}

}  // TEST_SUITE
