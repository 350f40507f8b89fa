// SPDX-License-Identifier: Apache-2.0
// Part of velochart; see LICENSE for terms.

#include <cmath>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "doctest.h"
#include "velochart/common.hpp"
#include "velochart/csi.hpp"
#include "velochart/dataset.hpp"
#include "velochart/environment.hpp"
#include "velochart/rng.hpp"
#include "velochart/trajectory.hpp"

using namespace velochart;

namespace {

EnvironmentSpec default_spec() {
  EnvironmentSpec spec;
  spec.obstacles.push_back({Rect{{6, 3}, {9, 7}}, true, true});
  return spec;
}

// Open 20 x 10 hall with a single base station, no scatterers.
Environment open_env() {
  Environment env;
  env.bounds = Rect{{0, 0}, {20, 10}};
  env.base_stations = {Vec2(0, 5)};
  env.bandwidth_hz = 2.0e8;
  env.sample_count = 16;
  env.noise_floor_db = -60.0;
  return env;
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

int first_bin_above_floor(const Environment& env, const Eigen::VectorXd& row) {
  const double floor = env.noise_floor_linear();
  for (int i = 0; i < row.size(); ++i)
    if (row[i] > floor * 1.001) return i;
  return -1;
}

}  // namespace

TEST_SUITE_BEGIN("sim_env");

TEST_CASE("environment generation is deterministic per seed") {
  const auto spec = default_spec();
  const Environment a = generate_environment(spec, 7);
  const Environment b = generate_environment(spec, 7);
  CHECK(environment_to_json(a) == environment_to_json(b));
  const Environment c = generate_environment(spec, 8);
  CHECK(environment_to_json(a) != environment_to_json(c));
}

TEST_CASE("base stations sit on the boundary at distinct spots") {
  const Environment env = generate_environment(default_spec(), 1);
  REQUIRE(env.base_stations.size() == 6);
  REQUIRE(env.scatterers.size() == 8);
  for (const auto& bs : env.base_stations) {
    CHECK(env.bounds.contains(bs));
    const bool on_edge = bs.x() == env.bounds.lo.x() || bs.x() == env.bounds.hi.x() ||
                         bs.y() == env.bounds.lo.y() || bs.y() == env.bounds.hi.y();
    CHECK(on_edge);
  }
  for (std::size_t i = 0; i < env.base_stations.size(); ++i)
    for (std::size_t j = i + 1; j < env.base_stations.size(); ++j)
      CHECK((env.base_stations[i] - env.base_stations[j]).norm() > 1.0);
  for (const auto& s : env.scatterers) CHECK(env.accessible(s));
  validate_environment(env);
}

TEST_CASE("an L shaped floor comes out of one inaccessible rectangle") {
  EnvironmentSpec spec;
  spec.width_m = 11;
  spec.height_m = 13;
  spec.bs_count = 4;
  spec.scatterer_count = 5;
  spec.obstacles.push_back({Rect{{5.5, 6.5}, {11, 13}}, true, true});
  const Environment env = generate_environment(spec, 5);
  validate_environment(env);
  CHECK_FALSE(env.accessible({8, 10}));
  CHECK(env.accessible({2, 2}));
  for (const auto& s : env.scatterers) CHECK(env.accessible(s));
}

TEST_CASE("fully covered environments are rejected") {
  EnvironmentSpec spec;
  spec.obstacles.push_back({Rect{{-1, -1}, {21, 11}}, true, true});
  CHECK_THROWS_AS(generate_environment(spec, 1), std::invalid_argument);
}

TEST_CASE("environment json round-trips byte for byte") {
  const Environment env = generate_environment(default_spec(), 11);
  const std::string j = environment_to_json(env);
  const Environment back = environment_from_json(j);
  CHECK(environment_to_json(back) == j);

  const std::string path = "env_roundtrip.json";
  save_environment(path, env);
  const Environment loaded = load_environment(path);
  CHECK(environment_to_json(loaded) == j);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(environment_from_json("{not json"), io_error);
}

TEST_CASE("csi has the configured shape and is deterministic") {
  const Environment env = generate_environment(default_spec(), 2);
  const CsiTensor a = synthesize_csi(env, {4, 4});
  CHECK(a.antennas() == 6);
  CHECK(a.bins() == 16);
  CHECK(a.grid.minCoeff() > 0.0);  // noise floor keeps everything positive
  const CsiTensor b = synthesize_csi(env, {4, 4});
  REQUIRE(a.grid.size() == b.grid.size());
  CHECK(std::memcmp(a.grid.data(), b.grid.data(),
                    sizeof(double) * a.grid.size()) == 0);
  CHECK(a.arrival_offsets == b.arrival_offsets);
  CHECK_THROWS_AS(synthesize_csi(env, {25, 5}), std::invalid_argument);
}

TEST_CASE("longer paths arrive in later bins") {
  const Environment env = open_env();
  const CsiTensor near = synthesize_csi(env, {5, 5});
  const CsiTensor far = synthesize_csi(env, {15, 5});
  const int b_near = first_bin_above_floor(env, near.grid.row(0));
  const int b_far = first_bin_above_floor(env, far.grid.row(0));
  REQUIRE(b_near >= 0);
  REQUIRE(b_far >= 0);
  CHECK(b_near < b_far);
  CHECK(near.arrival_offsets[0] < far.arrival_offsets[0]);
}

TEST_CASE("a position on top of a base station peaks at bin zero") {
  const Environment env = open_env();
  const CsiTensor csi = synthesize_csi(env, env.base_stations[0]);
  int peak = -1;
  csi.grid.row(0).maxCoeff(&peak);
  CHECK(peak == 0);
  // clamped free-space power: 1 / min_path^2
  const double expect = 1.0 / (env.min_path_m * env.min_path_m);
  CHECK(csi.grid(0, 0) ==
        doctest::Approx(expect + env.noise_floor_linear()).epsilon(1e-12));
}

TEST_CASE("a blocking wall scales the direct path by the nlos factor") {
  Environment env = open_env();
  const Vec2 p{10, 5};
  const CsiTensor clear = synthesize_csi(env, p);
  env.obstacles.push_back({Rect{{4, 4.5}, {6, 5.5}}, true, false});
  const CsiTensor blocked = synthesize_csi(env, p);
  const double floor = env.noise_floor_linear();
  bool checked_any = false;
  for (int c = 0; c < clear.grid.cols(); ++c) {
    const double ref = clear.grid(0, c) - floor;
    if (ref < floor) continue;  // empty bin
    const double ratio = (blocked.grid(0, c) - floor) / ref;
    CHECK(ratio == doctest::Approx(env.nlos_attenuation).epsilon(1e-9));
    checked_any = true;
  }
  CHECK(checked_any);
}

TEST_CASE("csi varies smoothly under small moves of fixed visibility") {
  const Environment env = generate_environment(default_spec(), 3);
  Rng rng(17);
  int tested = 0;
  for (int trial = 0; trial < 400 && tested < 40; ++trial) {
    const Vec2 p{rng.uniform(0.5, 19.5), rng.uniform(0.5, 9.5)};
    const double ang = rng.uniform(0.0, 6.283185307179586);
    const Vec2 q = p + 0.1 * Vec2(std::cos(ang), std::sin(ang));
    if (!env.accessible(p) || !env.accessible(q)) continue;
    bool same_visibility = true;
    for (const auto& bs : env.base_stations)
      if (env.path_blocked(p, bs) != env.path_blocked(q, bs)) {
        same_visibility = false;
        break;
      }
    if (!same_visibility) continue;
    const CsiTensor a = synthesize_csi(env, p);
    const CsiTensor b = synthesize_csi(env, q);
    const double rel = (a.grid - b.grid).norm() / a.grid.norm();
    CHECK(rel <= 0.2);
    ++tested;
  }
  CHECK(tested >= 30);
}

TEST_CASE("tdoa padding shifts rows against the earliest arrival") {
  CsiTensor csi;
  csi.grid.resize(3, 8);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 8; ++c) csi.grid(r, c) = 100.0 * r + c + 1;
  csi.arrival_offsets = {3, 7, 5};

  const CsiTensor padded = tdoa_pad(csi, PaddingMode::tdoa_padded);
  // shifts are offsets minus their minimum: 0, 4, 2
  for (int c = 0; c < 8; ++c) CHECK(padded.grid(0, c) == csi.grid(0, c));
  for (int c = 0; c < 4; ++c) CHECK(padded.grid(1, c) == 0.0);
  for (int c = 4; c < 8; ++c) CHECK(padded.grid(1, c) == csi.grid(1, c - 4));
  for (int c = 0; c < 2; ++c) CHECK(padded.grid(2, c) == 0.0);
  for (int c = 2; c < 8; ++c) CHECK(padded.grid(2, c) == csi.grid(2, c - 2));
  for (int off : padded.arrival_offsets) CHECK(off == 0);

  const CsiTensor twice = tdoa_pad(padded, PaddingMode::tdoa_padded);
  CHECK(bitwise_equal(twice.grid, padded.grid));

  CsiTensor equal = csi;
  equal.arrival_offsets = {4, 4, 4};
  CHECK(bitwise_equal(tdoa_pad(equal, PaddingMode::tdoa_padded).grid, csi.grid));

  CHECK(bitwise_equal(tdoa_pad(csi, PaddingMode::pre_synchronized).grid, csi.grid));
}

TEST_CASE("tdoa padding rejects shifts that empty a row") {
  CsiTensor csi;
  csi.grid = Eigen::MatrixXd::Ones(2, 16);
  csi.arrival_offsets = {0, 20};
  try {
    tdoa_pad(csi, PaddingMode::tdoa_padded);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }

  CsiTensor missing;
  missing.grid = Eigen::MatrixXd::Ones(2, 16);
  CHECK_THROWS_AS(tdoa_pad(missing, PaddingMode::tdoa_padded),
                  std::invalid_argument);
}

TEST_CASE("trajectories are deterministic and respect the environment") {
  const Environment env = generate_environment(default_spec(), 4);
  MotionSpec motion;
  motion.duration_s = 120;
  const Trajectory a = generate_trajectory(env, motion, 5.0, 99);
  const Trajectory b = generate_trajectory(env, motion, 5.0, 99);
  REQUIRE(a.size() == b.size());
  CHECK(a.size() == 601);  // floor(120 * 5) + 1
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a.positions[i] - b.positions[i]).norm() == 0);
    CHECK(a.timestamps[i] == b.timestamps[i]);
  }
  validate_trajectory(a, env, motion.max_speed());
}

TEST_CASE("realized speeds stay near the requested mean") {
  const Environment env = generate_environment(default_spec(), 4);
  for (const double target : {0.28, 0.98}) {
    MotionSpec motion;
    motion.mean_speed_mps = target;
    motion.speed_std = target < 0.5 ? 0.10 : 0.45;
    motion.duration_s = 300;
    const Trajectory traj = generate_trajectory(env, motion, 10.0, 12);
    double sum = 0;
    for (std::size_t i = 0; i + 1 < traj.size(); ++i)
      sum += (traj.positions[i + 1] - traj.positions[i]).norm() * 10.0;
    const double mean = sum / static_cast<double>(traj.size() - 1);
    CHECK(mean > 0.85 * target);
    CHECK(mean < 1.15 * target);
  }
}

TEST_CASE("zero motion noise walks a straight line until a wall") {
  Environment env = open_env();
  MotionSpec motion;
  motion.speed_std = 0;
  motion.turn_rate_std = 0;
  motion.duration_s = 200;
  const Trajectory traj = generate_trajectory(env, motion, 4.0, 21);
  const Vec2 step = traj.positions[1] - traj.positions[0];
  REQUIRE(step.norm() > 0);
  std::size_t straight = 1;
  while (straight + 1 < traj.size() &&
         (traj.positions[straight + 1] - traj.positions[straight] - step).norm() <
             1e-9)
    ++straight;
  // follows the initial heading until the margin of the nearest wall
  const Vec2 last = traj.positions[straight];
  const Vec2 next = last + step;
  CHECK_FALSE(env.accessible(next, 0.05));
  CHECK(straight > 2);
}

TEST_CASE("trajectory json round-trips") {
  const Environment env = generate_environment(default_spec(), 4);
  MotionSpec motion;
  motion.duration_s = 10;
  const Trajectory traj = generate_trajectory(env, motion, 2.0, 5);
  const Trajectory back = trajectory_from_json(trajectory_to_json(traj));
  REQUIRE(back.size() == traj.size());
  CHECK(back.sample_rate_hz == traj.sample_rate_hz);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK((back.positions[i] - traj.positions[i]).norm() == 0);
    CHECK(back.timestamps[i] == doctest::Approx(traj.timestamps[i]).epsilon(1e-12));
  }
}

TEST_CASE("dataset container round-trips with and without a config hash") {
  Dataset ds;
  ds.n_antennas = 2;
  ds.n_bins = 4;
  ds.rate_hz = 2.0;
  for (int i = 0; i < 5; ++i) {
    Eigen::MatrixXd g(2, 4);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 4; ++c) g(r, c) = 0.25f * (i + r + c);
    ds.csi.push_back(g);
    ds.timestamps.push_back(0.5 * i);
    ds.positions.push_back(Vec2(i, -i));
  }
  const std::string path = "dataset_roundtrip.ccds";
  save_dataset(path, ds, 0xabcULL);
  const LoadedDataset loaded = load_dataset(path);
  REQUIRE(loaded.config_hash.has_value());
  CHECK(*loaded.config_hash == 0xabcULL);
  REQUIRE(loaded.data.size() == 5);
  CHECK(loaded.data.n_antennas == 2);
  CHECK(loaded.data.n_bins == 4);
  CHECK(loaded.data.rate_hz == 2.0);
  for (int i = 0; i < 5; ++i) {
    CHECK(bitwise_equal(loaded.data.csi[i], ds.csi[i]));  // values chosen exact in f32
    CHECK(loaded.data.timestamps[i] == ds.timestamps[i]);
    CHECK((loaded.data.positions[i] - ds.positions[i]).norm() == 0);
  }

  Dataset anon = ds;
  anon.positions.clear();
  save_dataset(path, anon, std::nullopt);
  const LoadedDataset plain = load_dataset(path);
  CHECK_FALSE(plain.config_hash.has_value());
  CHECK_FALSE(plain.data.has_positions());

  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset(path), io_error);
}

TEST_CASE("segmented datasets index through one global space") {
  SegmentedDataset seg;
  for (std::size_t n : {3u, 4u}) {
    Dataset ds;
    ds.n_antennas = 1;
    ds.n_bins = 2;
    ds.rate_hz = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      ds.csi.push_back(Eigen::MatrixXd::Constant(1, 2, double(seg.segments.size() * 10 + i)));
      ds.timestamps.push_back(double(i));
      ds.positions.push_back(Vec2(double(i), 0));
    }
    seg.segments.push_back(std::move(ds));
  }
  CHECK(seg.total_samples() == 7);
  CHECK(seg.segment_start(0) == 0);
  CHECK(seg.segment_start(1) == 3);
  CHECK(seg.locate(2) == std::pair<std::size_t, std::size_t>{0, 2});
  CHECK(seg.locate(5) == std::pair<std::size_t, std::size_t>{1, 2});
  CHECK(seg.csi_at(5)(0, 0) == 12.0);
  CHECK(seg.all_have_positions());
  CHECK_THROWS_AS(seg.locate(7), std::invalid_argument);
}

TEST_SUITE_END();
