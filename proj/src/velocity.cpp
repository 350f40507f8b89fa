// SPDX-License-Identifier: Apache-2.0
// Part of velochart; see LICENSE for terms.

#include "velochart/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "velochart/binio.hpp"
#include "velochart/common.hpp"
#include "velochart/textio.hpp"

namespace velochart {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTimeTol = 1e-9;

}  // namespace

NoiseProfile noise_preset(int level) {
  NoiseProfile p;
  switch (level) {
    case 0:
      break;
    case 1:
      p.instantaneous_rotations = {
          {5.0, kPi / 4}, {20.0, -kPi / 8}, {60.0, -kPi / 6}};
      break;
    case 2:
      p.angular_bias = kPi / 200;
      p.instantaneous_rotations = {
          {5.0, kPi / 4}, {40.0, -kPi / 8}, {60.0, -kPi / 6}};
      break;
    case 3:
      p.angular_bias = kPi / 100;
      p.instantaneous_rotations = {
          {5.0, kPi / 4}, {40.0, -kPi / 8}, {60.0, -kPi / 6}};
      break;
    case 4:
      p.angular_bias = kPi / 200;
      p.magnitude_bias = -0.1;
      p.instantaneous_rotations = {
          {5.0, kPi / 4}, {40.0, -kPi / 8}, {60.0, -kPi / 6}};
      break;
    default:
      throw std::invalid_argument("noise level must be in 0..4");
  }
  return p;
}

VelocitySeries derive_velocity(const Trajectory& traj) {
  const std::size_t n = traj.size();
  if (n < 2)
    throw std::invalid_argument("trajectory too short to derive velocity");
  if (traj.sample_rate_hz <= 0.0)
    throw std::invalid_argument("trajectory sample rate must be positive");
  const double dt = 1.0 / traj.sample_rate_hz;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double gap = traj.timestamps[i + 1] - traj.timestamps[i];
    if (std::abs(gap - dt) > kTimeTol)
      throw std::invalid_argument("trajectory timestamps are not uniform at sample " +
                                  std::to_string(i));
  }
  VelocitySeries v;
  v.timestamps.assign(traj.timestamps.begin(), traj.timestamps.end() - 1);
  v.velocities.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i)
    v.velocities[i] = (traj.positions[i + 1] - traj.positions[i]) * traj.sample_rate_hz;
  return v;
}

VelocitySeries apply_noise(const VelocitySeries& v, const NoiseProfile& profile) {
  VelocitySeries out = v;
  const std::size_t n = v.size();
  if (n == 0) return out;
  const double t0 = v.timestamps.front();
  for (std::size_t i = 0; i < n; ++i) {
    double theta = profile.angular_bias * (v.timestamps[i] - t0);
    const double percent = 100.0 * static_cast<double>(i) / static_cast<double>(n);
    for (const auto& [pos, angle] : profile.instantaneous_rotations)
      if (percent >= pos) theta += angle;
    Vec2 rotated = rotation2d(theta) * v.velocities[i];
    if (profile.magnitude_bias != 0.0) {
      const double mag = rotated.norm();
      if (mag > 0.0)
        rotated *= std::max(0.0, mag + profile.magnitude_bias) / mag;
    }
    out.velocities[i] = rotated;
  }
  return out;
}

std::pair<Vec2, double> integrate_window(const VelocitySeries& v, double t_n,
                                         double t_k) {
  const std::size_t n = v.size();
  if (n < 2)
    throw std::invalid_argument("velocity series too short to integrate");
  if (!(t_n < t_k))
    throw std::invalid_argument("integration window must have positive length");
  const double dt = v.timestamps[1] - v.timestamps[0];
  const double t_end = v.timestamps.back() + dt;
  if (t_n < v.timestamps.front() - kTimeTol || t_k > t_end + kTimeTol)
    throw std::invalid_argument("integration window outside the recorded span");

  const double t0 = v.timestamps.front();
  std::size_t i = 0;
  if (t_n > t0) {
    const double off = std::floor((t_n - t0) / dt);
    i = static_cast<std::size_t>(std::max(0.0, off));
    if (i >= n) i = n - 1;
    while (i > 0 && v.timestamps[i] > t_n) --i;
  }
  Vec2 disp = Vec2::Zero();
  for (; i < n && v.timestamps[i] < t_k; ++i) {
    const double hi = std::min(t_k, (i + 1 < n) ? v.timestamps[i + 1] : t_end);
    const double lo = std::max(t_n, v.timestamps[i]);
    if (hi > lo) disp += v.velocities[i] * (hi - lo);
  }
  return {disp, disp.norm()};
}

SparseDistanceMatrix build_sparse_distance_matrix(const VelocitySeries& v,
                                                  double window_s,
                                                  std::size_t stride) {
  if (window_s <= 0.0)
    throw std::invalid_argument("distance window must be positive");
  if (stride == 0)
    throw std::invalid_argument("anchor stride must be at least 1");
  SparseDistanceMatrix sdm;
  sdm.window_s = window_s;
  sdm.stride = stride;
  append_sdm_segment(sdm, v, 0, 0);
  if (sdm.entries.empty())
    sdm.warning = "window shorter than the sample period, no pair survives";
  return sdm;
}

void append_sdm_segment(SparseDistanceMatrix& sdm, const VelocitySeries& v,
                        std::uint32_t segment_id, std::size_t index_offset) {
  const std::size_t n = v.size();
  if (n < 2) return;
  const double dt = v.timestamps[1] - v.timestamps[0];
  for (std::size_t a = 0; a < n; a += sdm.stride) {
    const double t_a = v.timestamps[a];
    Vec2 disp = Vec2::Zero();
    for (std::size_t k = a + 1; k < n; ++k) {
      const double span = v.timestamps[k] - t_a;
      if (span >= sdm.window_s - kTimeTol) break;
      disp += v.velocities[k - 1] *
              (v.timestamps[k] - v.timestamps[k - 1]);
      SdmEntry e;
      e.n = index_offset + a;
      e.k = index_offset + k;
      e.d = disp.norm();
      e.weight = 1.0 - span / sdm.window_s;
      e.segment = segment_id;
      sdm.entries.push_back(e);
    }
    (void)dt;
  }
}

void save_sdm_csv(const std::string& path, const SparseDistanceMatrix& sdm,
                  std::optional<std::uint64_t> config_hash) {
  std::ostringstream os;
  if (config_hash) os << "# config_hash=" << text::fmt_hex(*config_hash) << "\n";
  os << "n,k,d_m,weight,segment\n";
  for (const auto& e : sdm.entries) {
    os << e.n << ',' << e.k << ',' << text::fmt(e.d) << ','
       << text::fmt(e.weight) << ',' << e.segment << '\n';
  }
  text::write_file(path, os.str());
}

namespace {
constexpr std::uint32_t kSdmVersion = 1;
}

void save_sdm_binary(const std::string& path, const SparseDistanceMatrix& sdm,
                     std::optional<std::uint64_t> config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open " + path + " for writing");
  bin::put_magic(os, "CCSM");
  bin::put<std::uint32_t>(os, kSdmVersion);
  bin::put<double>(os, sdm.window_s);
  bin::put<std::uint64_t>(os, sdm.stride);
  bin::put<std::uint64_t>(os, sdm.entries.size());
  for (const auto& e : sdm.entries) {
    bin::put<std::uint64_t>(os, e.n);
    bin::put<std::uint64_t>(os, e.k);
    bin::put<double>(os, e.d);
    bin::put<double>(os, e.weight);
    bin::put<std::uint32_t>(os, e.segment);
  }
  if (config_hash) {
    bin::put_magic(os, "CCFG");
    bin::put<std::uint64_t>(os, *config_hash);
  }
  if (!os) throw io_error("failed while writing " + path);
}

SparseDistanceMatrix load_sdm_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open " + path);
  bin::expect_magic(is, "CCSM", path);
  const auto version = bin::get<std::uint32_t>(is, "sdm version");
  if (version != kSdmVersion)
    throw io_error("unsupported sparse distance matrix version in " + path);
  SparseDistanceMatrix sdm;
  sdm.window_s = bin::get<double>(is, "sdm window");
  sdm.stride = static_cast<std::size_t>(bin::get<std::uint64_t>(is, "sdm stride"));
  const auto count = bin::get<std::uint64_t>(is, "sdm entry count");
  sdm.entries.resize(count);
  for (auto& e : sdm.entries) {
    e.n = static_cast<std::size_t>(bin::get<std::uint64_t>(is, "sdm entry"));
    e.k = static_cast<std::size_t>(bin::get<std::uint64_t>(is, "sdm entry"));
    e.d = bin::get<double>(is, "sdm entry");
    e.weight = bin::get<double>(is, "sdm entry");
    e.segment = bin::get<std::uint32_t>(is, "sdm entry");
  }
  return sdm;
}

}  // namespace velochart
