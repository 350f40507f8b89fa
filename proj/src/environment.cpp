// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/environment.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "velochart/rng.hpp"
#include "velochart/textio.hpp"

namespace velochart {

double Environment::noise_floor_linear() const {
  return std::pow(10.0, noise_floor_db / 10.0);
}

bool Environment::accessible(const Vec2& p, double wall_margin) const {
  if (!bounds.contains(p, wall_margin)) return false;
  for (const auto& ob : obstacles) {
    if (ob.inaccessible && ob.rect.contains(p)) return false;
  }
  return true;
}

bool Environment::crosses_inaccessible(const Vec2& a, const Vec2& b) const {
  for (const auto& ob : obstacles) {
    if (ob.inaccessible && segment_intersects_rect(a, b, ob.rect)) return true;
  }
  return false;
}

bool Environment::path_blocked(const Vec2& a, const Vec2& b) const {
  for (const auto& ob : obstacles) {
    if (ob.blocking && segment_intersects_rect(a, b, ob.rect)) return true;
  }
  return false;
}

namespace {

Vec2 perimeter_point(const Rect& r, double arc) {
  const double w = r.width();
  const double h = r.height();
  double s = std::fmod(arc, 2.0 * (w + h));
  if (s < w) return {r.lo.x() + s, r.lo.y()};
  s -= w;
  if (s < h) return {r.hi.x(), r.lo.y() + s};
  s -= h;
  if (s < w) return {r.hi.x() - s, r.hi.y()};
  s -= w;
  return {r.lo.x(), r.hi.y() - s};
}

bool has_free_space(const Environment& env) {
  const int n = 64;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 p{env.bounds.lo.x() + (i + 0.5) / n * env.bounds.width(),
                   env.bounds.lo.y() + (j + 0.5) / n * env.bounds.height()};
      if (env.accessible(p)) return true;
    }
  }
  return false;
}

}  // namespace

void validate_environment(const Environment& env) {
  if (env.bounds.width() <= 0.0 || env.bounds.height() <= 0.0)
    throw std::invalid_argument("environment bounds must have positive area");
  if (env.bandwidth_hz <= 0.0)
    throw std::invalid_argument("bandwidth_hz must be positive");
  if (env.sample_count < 8)
    throw std::invalid_argument("sample_count must be at least 8");
  if (env.base_stations.empty())
    throw std::invalid_argument("at least one base station required");
  for (const auto& bs : env.base_stations) {
    if (!env.bounds.contains(bs))
      throw std::invalid_argument("base station outside bounds");
  }
  for (const auto& sc : env.scatterers) {
    if (!env.bounds.contains(sc))
      throw std::invalid_argument("scatterer outside bounds");
  }
  for (const auto& ob : env.obstacles) {
    if (ob.inaccessible && ob.rect.area() <= 0.0)
      throw std::invalid_argument("inaccessible obstacle must have positive area");
  }
  if (!has_free_space(env))
    throw std::invalid_argument("obstacles cover the whole environment, no free space");
}

Environment generate_environment(const EnvironmentSpec& spec, std::uint64_t seed) {
  if (spec.width_m <= 0.0 || spec.height_m <= 0.0)
    throw std::invalid_argument("environment dimensions must be positive");
  if (spec.bs_count < 1)
    throw std::invalid_argument("bs_count must be at least 1");

  Environment env;
  env.bounds = Rect{{0.0, 0.0}, {spec.width_m, spec.height_m}};
  env.obstacles = spec.obstacles;
  env.bandwidth_hz = spec.bandwidth_hz;
  env.sample_count = spec.sample_count;
  env.noise_floor_db = spec.noise_floor_db;
  env.nlos_attenuation = spec.nlos_attenuation;
  env.scatter_gain = spec.scatter_gain;
  env.min_path_m = spec.min_path_m;

  const double perimeter = 2.0 * (spec.width_m + spec.height_m);
  for (int i = 0; i < spec.bs_count; ++i) {
    env.base_stations.push_back(
        perimeter_point(env.bounds, perimeter * i / spec.bs_count));
  }

  Rng rng(derive_seed(seed, 0x5c477e7));
  for (int i = 0; i < spec.scatterer_count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 20000; ++attempt) {
      const Vec2 p{rng.uniform(env.bounds.lo.x(), env.bounds.hi.x()),
                   rng.uniform(env.bounds.lo.y(), env.bounds.hi.y())};
      if (env.accessible(p)) {
        env.scatterers.push_back(p);
        placed = true;
        break;
      }
    }
    if (!placed)
      throw std::invalid_argument(
          "obstacles cover the whole environment, cannot place scatterers");
  }

  validate_environment(env);
  return env;
}

namespace {

nlohmann::json vec2_json(const Vec2& v) {
  return nlohmann::json::array({v.x(), v.y()});
}

Vec2 vec2_from(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2)
    throw io_error("expected [x, y] for " + what);
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string environment_to_json(const Environment& env) {
  nlohmann::json j;
  j["bounds"] = {{"lo", vec2_json(env.bounds.lo)}, {"hi", vec2_json(env.bounds.hi)}};
  j["bandwidth_hz"] = env.bandwidth_hz;
  j["sample_count"] = env.sample_count;
  j["noise_floor_db"] = env.noise_floor_db;
  j["nlos_attenuation"] = env.nlos_attenuation;
  j["scatter_gain"] = env.scatter_gain;
  j["min_path_m"] = env.min_path_m;
  j["base_stations"] = nlohmann::json::array();
  for (const auto& bs : env.base_stations) j["base_stations"].push_back(vec2_json(bs));
  j["scatterers"] = nlohmann::json::array();
  for (const auto& sc : env.scatterers) j["scatterers"].push_back(vec2_json(sc));
  j["obstacles"] = nlohmann::json::array();
  for (const auto& ob : env.obstacles) {
    j["obstacles"].push_back({{"lo", vec2_json(ob.rect.lo)},
                              {"hi", vec2_json(ob.rect.hi)},
                              {"blocking", ob.blocking},
                              {"inaccessible", ob.inaccessible}});
  }
  return j.dump(2) + "\n";
}

Environment environment_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("environment json parse error: ") + e.what());
  }
  try {
    Environment env;
    env.bounds.lo = vec2_from(j.at("bounds").at("lo"), "bounds.lo");
    env.bounds.hi = vec2_from(j.at("bounds").at("hi"), "bounds.hi");
    env.bandwidth_hz = j.at("bandwidth_hz").get<double>();
    env.sample_count = j.at("sample_count").get<int>();
    env.noise_floor_db = j.at("noise_floor_db").get<double>();
    env.nlos_attenuation = j.value("nlos_attenuation", 0.1);
    env.scatter_gain = j.value("scatter_gain", 0.3);
    env.min_path_m = j.value("min_path_m", 2.0);
    for (const auto& b : j.at("base_stations"))
      env.base_stations.push_back(vec2_from(b, "base_stations"));
    if (j.contains("scatterers")) {
      for (const auto& s : j.at("scatterers"))
        env.scatterers.push_back(vec2_from(s, "scatterers"));
    }
    if (j.contains("obstacles")) {
      for (const auto& o : j.at("obstacles")) {
        Obstacle ob;
        ob.rect.lo = vec2_from(o.at("lo"), "obstacle.lo");
        ob.rect.hi = vec2_from(o.at("hi"), "obstacle.hi");
        ob.blocking = o.value("blocking", true);
        ob.inaccessible = o.value("inaccessible", true);
        env.obstacles.push_back(ob);
      }
    }
    validate_environment(env);
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("environment json field error: ") + e.what());
  }
}

void save_environment(const std::string& path, const Environment& env) {
  text::write_file(path, environment_to_json(env));
}

Environment load_environment(const std::string& path) {
  return environment_from_json(text::read_file(path));
}

}  // namespace velochart
