// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "velochart/rng.hpp"
#include "velochart/textio.hpp"

namespace velochart {

namespace {

constexpr double kWallMargin = 0.05;
constexpr double kSpeedReversion = 0.5;  // 1/s, pull of speed toward the mean

Vec2 heading_vec(double psi) { return {std::cos(psi), std::sin(psi)}; }

// A step is feasible when its endpoint is accessible and the step segment does
// not cut through an inaccessible obstacle (keeps thin walls watertight).
bool step_ok(const Environment& env, const Vec2& from, const Vec2& to) {
  return env.accessible(to, kWallMargin) && !env.crosses_inaccessible(from, to);
}

}  // namespace

Trajectory generate_trajectory(const Environment& env, const MotionSpec& motion,
                               double rate_hz, std::uint64_t seed) {
  if (motion.mean_speed_mps <= 0.0)
    throw std::invalid_argument("mean_speed must be positive");
  if (rate_hz <= 0.0) throw std::invalid_argument("rate_hz must be positive");
  if (motion.duration_s < 1.0 / rate_hz)
    throw std::invalid_argument("duration shorter than one sample period");

  Rng rng(derive_seed(seed, 0x7a7));
  Vec2 pos;
  bool started = false;
  for (int attempt = 0; attempt < 100000; ++attempt) {
    pos = {rng.uniform(env.bounds.lo.x(), env.bounds.hi.x()),
           rng.uniform(env.bounds.lo.y(), env.bounds.hi.y())};
    if (env.accessible(pos, kWallMargin)) {
      started = true;
      break;
    }
  }
  if (!started)
    throw std::invalid_argument("no free space for trajectory start point");

  const double dt = 1.0 / rate_hz;
  const auto count = static_cast<std::size_t>(std::floor(motion.duration_s * rate_hz)) + 1;

  Trajectory traj;
  traj.sample_rate_hz = rate_hz;
  traj.timestamps.reserve(count);
  traj.positions.reserve(count);

  double psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double speed = std::clamp(motion.mean_speed_mps + motion.speed_std * rng.normal(),
                            0.0, motion.max_speed());

  traj.timestamps.push_back(0.0);
  traj.positions.push_back(pos);

  for (std::size_t i = 1; i < count; ++i) {
    speed += kSpeedReversion * (motion.mean_speed_mps - speed) * dt +
             motion.speed_std * std::sqrt(2.0 * kSpeedReversion * dt) * rng.normal();
    speed = std::clamp(speed, 0.0, motion.max_speed());
    psi += motion.turn_rate_std * std::sqrt(dt) * rng.normal();

    Vec2 next = pos + dt * speed * heading_vec(psi);
    if (!step_ok(env, pos, next)) {
      // reflect off whichever axis the step violated, then fall back to a turn
      const bool out_x = next.x() < env.bounds.lo.x() + kWallMargin ||
                         next.x() > env.bounds.hi.x() - kWallMargin;
      const double mirror_x = std::numbers::pi - psi;
      const double mirror_y = -psi;
      const double candidates[3] = {out_x ? mirror_x : mirror_y,
                                    out_x ? mirror_y : mirror_x,
                                    psi + std::numbers::pi};
      bool moved = false;
      for (const double cand : candidates) {
        const Vec2 alt = pos + dt * speed * heading_vec(cand);
        if (step_ok(env, pos, alt)) {
          psi = cand;
          next = alt;
          moved = true;
          break;
        }
      }
      if (!moved) {
        psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        next = pos;  // boxed in this step, stand still
      }
    }

    pos = next;
    traj.timestamps.push_back(static_cast<double>(i) * dt);
    traj.positions.push_back(pos);
  }
  return traj;
}

void validate_trajectory(const Trajectory& traj, const Environment& env,
                         double max_speed) {
  if (traj.positions.size() != traj.timestamps.size())
    throw std::runtime_error("trajectory timestamp/position length mismatch");
  const double dt = 1.0 / traj.sample_rate_hz;
  for (std::size_t i = 0; i < traj.positions.size(); ++i) {
    if (!env.accessible(traj.positions[i]))
      throw std::runtime_error("trajectory position " + std::to_string(i) +
                               " violates accessibility");
    if (i > 0) {
      const double gap = traj.timestamps[i] - traj.timestamps[i - 1];
      if (std::abs(gap - dt) > 1e-9)
        throw std::runtime_error("non-uniform timestamp gap at sample " +
                                 std::to_string(i));
      const double speed =
          (traj.positions[i] - traj.positions[i - 1]).norm() / gap;
      if (speed > max_speed + 1e-9)
        throw std::runtime_error("speed above maximum at sample " +
                                 std::to_string(i));
    }
  }
}

std::string trajectory_to_json(const Trajectory& traj) {
  nlohmann::json j;
  j["sample_rate_hz"] = traj.sample_rate_hz;
  j["t0"] = traj.timestamps.empty() ? 0.0 : traj.timestamps.front();
  j["positions"] = nlohmann::json::array();
  for (const auto& p : traj.positions)
    j["positions"].push_back(nlohmann::json::array({p.x(), p.y()}));
  return j.dump() + "\n";
}

Trajectory trajectory_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
    Trajectory traj;
    traj.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    const double t0 = j.value("t0", 0.0);
    const auto& pts = j.at("positions");
    traj.positions.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      traj.positions.emplace_back(pts[i][0].get<double>(), pts[i][1].get<double>());
      traj.timestamps.push_back(t0 + static_cast<double>(i) / traj.sample_rate_hz);
    }
    return traj;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("trajectory json error: ") + e.what());
  }
}

}  // namespace velochart
