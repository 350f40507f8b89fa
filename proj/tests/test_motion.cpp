// SPDX-License-Identifier: Apache-2.0
// Part of velochart; see LICENSE for terms.

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "doctest.h"
#include "velochart/environment.hpp"
#include "velochart/textio.hpp"
#include "velochart/trajectory.hpp"
#include "velochart/velocity.hpp"

using namespace velochart;

namespace {

constexpr double kPi = 3.14159265358979323846;

VelocitySeries constant_series(const Vec2& v, std::size_t n, double dt = 1.0) {
  VelocitySeries s;
  for (std::size_t i = 0; i < n; ++i) {
    s.timestamps.push_back(dt * static_cast<double>(i));
    s.velocities.push_back(v);
  }
  return s;
}

Trajectory circle_walk(double radius, double dtheta, std::size_t n) {
  Trajectory t;
  t.sample_rate_hz = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = dtheta * static_cast<double>(i);
    t.timestamps.push_back(static_cast<double>(i));
    t.positions.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return t;
}

Environment test_env() {
  EnvironmentSpec spec;
  spec.obstacles.push_back({Rect{{6, 3}, {9, 7}}, true, true});
  return generate_environment(spec, 4);
}

}  // namespace

TEST_SUITE_BEGIN("motion");

TEST_CASE("forward differences recover constant motion") {
  Trajectory t;
  t.sample_rate_hz = 1.0;
  t.timestamps = {0, 1, 2};
  t.positions = {Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)};
  const VelocitySeries v = derive_velocity(t);
  REQUIRE(v.size() == 2);
  CHECK(v.timestamps == std::vector<double>{0, 1});
  CHECK((v.velocities[0] - Vec2(1, 0)).norm() == 0);
  CHECK((v.velocities[1] - Vec2(1, 0)).norm() == 0);
}

TEST_CASE("a stationary trajectory has zero velocity") {
  Trajectory t;
  t.sample_rate_hz = 2.0;
  for (int i = 0; i < 6; ++i) {
    t.timestamps.push_back(0.5 * i);
    t.positions.emplace_back(3.0, 4.0);
  }
  const VelocitySeries v = derive_velocity(t);
  for (const auto& vi : v.velocities) CHECK(vi.norm() == 0.0);
}

TEST_CASE("circular walks give chord-length speed") {
  const double r = 2.0, dtheta = 0.3;
  const VelocitySeries v = derive_velocity(circle_walk(r, dtheta, 30));
  const double chord = 2.0 * r * std::sin(dtheta / 2.0);
  for (const auto& vi : v.velocities)
    CHECK(vi.norm() == doctest::Approx(chord).epsilon(1e-12));
}

TEST_CASE("non uniform timestamps are rejected") {
  Trajectory t;
  t.sample_rate_hz = 1.0;
  t.timestamps = {0, 1, 2.5};
  t.positions = {Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)};
  CHECK_THROWS_AS(derive_velocity(t), std::invalid_argument);
}

TEST_CASE("noise presets carry the five documented levels") {
  const NoiseProfile l0 = noise_preset(0);
  CHECK(l0.angular_bias == 0.0);
  CHECK(l0.magnitude_bias == 0.0);
  CHECK(l0.instantaneous_rotations.empty());

  const NoiseProfile l1 = noise_preset(1);
  CHECK(l1.angular_bias == 0.0);
  REQUIRE(l1.instantaneous_rotations.size() == 3);
  CHECK(l1.instantaneous_rotations[0] == std::pair<double, double>{5.0, kPi / 4});
  CHECK(l1.instantaneous_rotations[1] == std::pair<double, double>{20.0, -kPi / 8});
  CHECK(l1.instantaneous_rotations[2] == std::pair<double, double>{60.0, -kPi / 6});

  const NoiseProfile l2 = noise_preset(2);
  CHECK(l2.angular_bias == kPi / 200);
  CHECK(l2.instantaneous_rotations[1].first == 40.0);

  CHECK(noise_preset(3).angular_bias == kPi / 100);

  const NoiseProfile l4 = noise_preset(4);
  CHECK(l4.angular_bias == kPi / 200);
  CHECK(l4.magnitude_bias == -0.1);

  for (int level = 0; level < 5; ++level) {
    const auto p = noise_preset(level);
    for (std::size_t i = 1; i < p.instantaneous_rotations.size(); ++i)
      CHECK(p.instantaneous_rotations[i - 1].first <
            p.instantaneous_rotations[i].first);
  }
  CHECK_THROWS_AS(noise_preset(5), std::invalid_argument);
  CHECK_THROWS_AS(noise_preset(-1), std::invalid_argument);
}

TEST_CASE("noise level zero is the identity") {
  const VelocitySeries v = constant_series(Vec2(1.2, -0.7), 40);
  const VelocitySeries out = apply_noise(v, noise_preset(0));
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK((out.velocities[i] - v.velocities[i]).norm() == 0);
}

TEST_CASE("magnitude bias shrinks speeds and clamps at zero") {
  const VelocitySeries v = constant_series(Vec2(0.6, 0.8), 10);
  NoiseProfile p;
  p.magnitude_bias = -0.1;
  const VelocitySeries out = apply_noise(v, p);
  for (const auto& vi : out.velocities) {
    CHECK(vi.norm() == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(vi.normalized().dot(Vec2(0.6, 0.8)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  p.magnitude_bias = -2.0;
  for (const auto& vi : apply_noise(v, p).velocities) CHECK(vi.norm() == 0.0);
}

TEST_CASE("angular bias accumulates from the recording start") {
  const VelocitySeries v = constant_series(Vec2(1, 0), 101);  // t = 0..100
  NoiseProfile p;
  p.angular_bias = kPi / 200;
  const VelocitySeries out = apply_noise(v, p);
  CHECK((out.velocities.front() - Vec2(1, 0)).norm() == 0);
  CHECK((out.velocities.back() - Vec2(0, 1)).norm() < 1e-9);
}

TEST_CASE("instantaneous rotations switch on at their percentage position") {
  const VelocitySeries v = constant_series(Vec2(1, 0), 100);
  NoiseProfile p;
  p.instantaneous_rotations = {{50.0, kPi / 2}};
  const VelocitySeries out = apply_noise(v, p);
  for (std::size_t i = 0; i < 50; ++i)
    CHECK((out.velocities[i] - Vec2(1, 0)).norm() == 0);
  for (std::size_t i = 50; i < 100; ++i)
    CHECK((out.velocities[i] - Vec2(0, 1)).norm() < 1e-12);
}

TEST_CASE("window integration of constant velocity") {
  const VelocitySeries v = constant_series(Vec2(1, 0), 3);
  const auto [disp, d] = integrate_window(v, 0.0, 3.0);
  CHECK(disp.x() == 3.0);
  CHECK(disp.y() == 0.0);
  CHECK(d == 3.0);
}

TEST_CASE("out and back cancels to zero distance") {
  VelocitySeries v;
  for (int i = 0; i < 6; ++i) {
    v.timestamps.push_back(i);
    v.velocities.emplace_back(i < 3 ? 1.0 : -1.0, 0.0);
  }
  const auto [disp, d] = integrate_window(v, 0.0, 6.0);
  CHECK(d == 0.0);
  (void)disp;
}

TEST_CASE("fractional windows take partial samples") {
  const VelocitySeries v = constant_series(Vec2(1, 0), 4);
  CHECK(integrate_window(v, 0.25, 0.75).first.x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(integrate_window(v, 0.5, 1.5).first.x() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(integrate_window(v, 3.0, 4.0).first.x() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("window integration rejects bad ranges") {
  const VelocitySeries v = constant_series(Vec2(1, 0), 4);
  CHECK_THROWS_AS(integrate_window(v, 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate_window(v, -0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate_window(v, 1.0, 4.5), std::invalid_argument);
}

TEST_CASE("integrated windows reproduce ground truth displacement") {
  const Environment env = test_env();
  MotionSpec motion;
  motion.duration_s = 120;
  const Trajectory traj = generate_trajectory(env, motion, 4.0, 31);
  const VelocitySeries v = derive_velocity(traj);
  for (auto [n, k] : {std::pair<int, int>{5, 42}, {0, 100}, {77, 320}}) {
    const auto [disp, d] = integrate_window(v, traj.timestamps[n], traj.timestamps[k]);
    const Vec2 truth = traj.positions[k] - traj.positions[n];
    CHECK((disp - truth).norm() <= 1e-6 * (traj.timestamps[k] - traj.timestamps[n]));
    CHECK(d == doctest::Approx(truth.norm()).epsilon(1e-9));
  }
}

TEST_CASE("the enumeration example: ten samples, three second window") {
  const VelocitySeries v = constant_series(Vec2(1, 0), 10);
  const SparseDistanceMatrix sdm = build_sparse_distance_matrix(v, 3.0, 1);
  CHECK(sdm.entries.size() == 17);
  CHECK(sdm.warning.empty());

  // anchor 0 reaches offsets one and two
  CHECK(sdm.entries[0].n == 0);
  CHECK(sdm.entries[0].k == 1);
  CHECK(sdm.entries[0].d == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sdm.entries[0].weight == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(sdm.entries[1].k == 2);
  CHECK(sdm.entries[1].d == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sdm.entries[1].weight == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  int with_anchor_8 = 0, with_anchor_9 = 0;
  for (const auto& e : sdm.entries) {
    if (e.n == 8) ++with_anchor_8;
    if (e.n == 9) ++with_anchor_9;
    CHECK(e.weight > 0.0);
    CHECK(e.weight <= 1.0);
    CHECK(e.weight ==
          doctest::Approx(1.0 - (v.timestamps[e.k] - v.timestamps[e.n]) / 3.0)
              .epsilon(1e-12));
  }
  CHECK(with_anchor_8 == 1);
  CHECK(with_anchor_9 == 0);
}

TEST_CASE("per anchor ordering and the stride rule") {
  const VelocitySeries v = constant_series(Vec2(0.5, 0.5), 10);
  const SparseDistanceMatrix sdm = build_sparse_distance_matrix(v, 3.0, 2);
  CHECK(sdm.entries.size() == 9);  // anchors 0,2,4,6,8
  std::size_t prev_n = 0;
  std::size_t prev_k = 0;
  double prev_w = 2.0;
  for (const auto& e : sdm.entries) {
    CHECK(e.n % 2 == 0);
    if (e.n == prev_n) {
      CHECK(e.k > prev_k);
      CHECK(e.weight < prev_w);
    }
    prev_n = e.n;
    prev_k = e.k;
    prev_w = e.weight;
  }
}

TEST_CASE("entry count respects the sparsity bound") {
  const Environment env = test_env();
  MotionSpec motion;
  motion.duration_s = 25;
  const Trajectory traj = generate_trajectory(env, motion, 2.0, 8);
  const VelocitySeries v = derive_velocity(traj);  // N = 50
  const SparseDistanceMatrix sdm = build_sparse_distance_matrix(v, 4.0, 3);
  const std::size_t bound = ((v.size() + 2) / 3) * 8;  // ceil(N/s) * ceil(w*rate)
  CHECK(sdm.entries.size() <= bound);
  CHECK(!sdm.entries.empty());
}

TEST_CASE("noise free distances match ground truth") {
  const Environment env = test_env();
  MotionSpec motion;
  motion.duration_s = 300;
  const Trajectory traj = generate_trajectory(env, motion, 2.0, 13);
  const VelocitySeries v = derive_velocity(traj);
  const SparseDistanceMatrix sdm = build_sparse_distance_matrix(v, 15.0, 10);
  REQUIRE(!sdm.entries.empty());
  for (const auto& e : sdm.entries) {
    const double truth = (traj.positions[e.k] - traj.positions[e.n]).norm();
    CHECK(std::abs(e.d - truth) <= 1e-6 * (truth + 1e-9));
  }
}

TEST_CASE("circle distances match the closed form chord") {
  const double r = 2.0, dtheta = 0.25;
  const VelocitySeries v = derive_velocity(circle_walk(r, dtheta, 40));
  const SparseDistanceMatrix sdm = build_sparse_distance_matrix(v, 5.0, 1);
  for (const auto& e : sdm.entries) {
    const double span = dtheta * static_cast<double>(e.k - e.n);
    const double chord = 2.0 * r * std::sin(span / 2.0);
    CHECK(e.d == doctest::Approx(chord).epsilon(1e-9));
  }
}

TEST_CASE("drifting noise grows distance error with window offset") {
  const Environment env = test_env();
  MotionSpec motion;
  motion.duration_s = 600;
  const Trajectory traj = generate_trajectory(env, motion, 2.0, 23);
  const VelocitySeries noisy = apply_noise(derive_velocity(traj), noise_preset(2));
  const SparseDistanceMatrix sdm = build_sparse_distance_matrix(noisy, 15.0, 10);

  constexpr int kBuckets = 5;
  double err[kBuckets] = {};
  int cnt[kBuckets] = {};
  for (const auto& e : sdm.entries) {
    const double truth = (traj.positions[e.k] - traj.positions[e.n]).norm();
    const int offset = static_cast<int>(e.k - e.n);  // 1..29 samples
    const int b = std::min(kBuckets - 1, (offset - 1) * kBuckets / 29);
    err[b] += std::abs(e.d - truth);
    ++cnt[b];
  }
  for (int b = 0; b + 1 < kBuckets; ++b) {
    REQUIRE(cnt[b] > 0);
    REQUIRE(cnt[b + 1] > 0);
    CHECK(err[b] / cnt[b] <= err[b + 1] / cnt[b + 1]);
  }
}

TEST_CASE("segments never connect through the matrix") {
  const VelocitySeries a = constant_series(Vec2(1, 0), 8);
  const VelocitySeries b = constant_series(Vec2(0, 1), 6);
  SparseDistanceMatrix sdm;
  sdm.window_s = 4.0;
  sdm.stride = 1;
  append_sdm_segment(sdm, a, 0, 0);
  append_sdm_segment(sdm, b, 1, a.size());
  REQUIRE(!sdm.entries.empty());
  for (const auto& e : sdm.entries) {
    const bool first = e.k < a.size();
    CHECK((e.n < a.size()) == first);
    CHECK(e.segment == (first ? 0u : 1u));
  }
}

TEST_CASE("a window below the sample period degenerates with a warning") {
  const VelocitySeries v = constant_series(Vec2(1, 0), 10);
  const SparseDistanceMatrix sdm = build_sparse_distance_matrix(v, 0.5, 1);
  CHECK(sdm.entries.empty());
  CHECK(!sdm.warning.empty());
  CHECK_THROWS_AS(build_sparse_distance_matrix(v, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_sparse_distance_matrix(v, 3.0, 0), std::invalid_argument);
}

TEST_CASE("sparse matrices round-trip through the binary container") {
  const VelocitySeries v = constant_series(Vec2(1.5, -0.25), 12);
  const SparseDistanceMatrix sdm = build_sparse_distance_matrix(v, 4.0, 2);
  const std::string path = "sdm_roundtrip.ccsm";
  save_sdm_binary(path, sdm, 0x1234abcdULL);
  const SparseDistanceMatrix back = load_sdm_binary(path);
  CHECK(back.window_s == sdm.window_s);
  CHECK(back.stride == sdm.stride);
  REQUIRE(back.entries.size() == sdm.entries.size());
  for (std::size_t i = 0; i < sdm.entries.size(); ++i) {
    CHECK(back.entries[i].n == sdm.entries[i].n);
    CHECK(back.entries[i].k == sdm.entries[i].k);
    CHECK(back.entries[i].d == sdm.entries[i].d);
    CHECK(back.entries[i].weight == sdm.entries[i].weight);
    CHECK(back.entries[i].segment == sdm.entries[i].segment);
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv export carries the header and the config hash") {
  const VelocitySeries v = constant_series(Vec2(1, 0), 5);
  const SparseDistanceMatrix sdm = build_sparse_distance_matrix(v, 3.0, 1);
  const std::string path = "sdm_export.csv";
  save_sdm_csv(path, sdm, 0xffULL);
  const std::string content = text::read_file(path);
  CHECK(content.rfind("# config_hash=00000000000000ff\n", 0) == 0);
  CHECK(content.find("n,k,d_m,weight,segment\n") != std::string::npos);
  const auto lines = text::split(content, '\n');
  CHECK(lines.size() == sdm.entries.size() + 3);  // comment, header, trailing ""
  std::filesystem::remove(path);
}

TEST_SUITE_END();
