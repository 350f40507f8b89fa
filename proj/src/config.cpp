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

#include "velochart/config.hpp"

#include <map>
#include <stdexcept>

#include "velochart/common.hpp"
#include "velochart/textio.hpp"

namespace velochart {

namespace {

double to_double(std::string_view v, const std::string& key) {
  return text::parse_double(v, "config key " + key);
}

int to_int(std::string_view v, const std::string& key) {
  const double d = to_double(v, key);
  const int i = static_cast<int>(d);
  if (double(i) != d)
    throw std::invalid_argument("config key " + key + " must be an integer");
  return i;
}

std::uint64_t to_u64(std::string_view v, const std::string& key) {
  std::uint64_t out = 0;
  for (const char c : v) {
    if (c < '0' || c > '9')
      throw std::invalid_argument("config key " + key +
                                  " must be a non-negative integer");
    out = out * 10 + static_cast<std::uint64_t>(c - '0');
  }
  if (v.empty())
    throw std::invalid_argument("config key " + key + " has no value");
  return out;
}

bool to_bool(std::string_view v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("config key " + key + " must be true or false");
}

// obstacles parse as "x0 y0 x1 y1 blocking inaccessible"
Obstacle to_obstacle(std::string_view v, const std::string& key) {
  std::vector<std::string_view> parts;
  for (const auto p : text::split(v, ' '))
    if (!text::trim(p).empty()) parts.push_back(text::trim(p));
  if (parts.size() != 6)
    throw std::invalid_argument("config key " + key +
                                " needs x0 y0 x1 y1 blocking inaccessible");
  Obstacle o;
  o.rect.lo = Vec2(to_double(parts[0], key), to_double(parts[1], key));
  o.rect.hi = Vec2(to_double(parts[2], key), to_double(parts[3], key));
  o.blocking = to_bool(parts[4], key);
  o.inaccessible = to_bool(parts[5], key);
  return o;
}

void assign(PipelineConfig& cfg, const std::string& key, std::string_view value) {
  ExperimentConfig& e = cfg.experiment;
  if (key == "env.width_m") e.env.width_m = to_double(value, key);
  else if (key == "env.height_m") e.env.height_m = to_double(value, key);
  else if (key == "env.bs_count") e.env.bs_count = to_int(value, key);
  else if (key == "env.scatterer_count") e.env.scatterer_count = to_int(value, key);
  else if (key.rfind("env.obstacle.", 0) == 0) {
    // numbered keys arrive in file order and append in that order
    e.env.obstacles.push_back(to_obstacle(value, key));
  } else if (key == "env.bandwidth_hz") e.env.bandwidth_hz = to_double(value, key);
  else if (key == "env.sample_count") e.env.sample_count = to_int(value, key);
  else if (key == "env.noise_floor_db") e.env.noise_floor_db = to_double(value, key);
  else if (key == "env.nlos_attenuation") e.env.nlos_attenuation = to_double(value, key);
  else if (key == "env.scatter_gain") e.env.scatter_gain = to_double(value, key);
  else if (key == "env.min_path_m") e.env.min_path_m = to_double(value, key);
  else if (key == "motion.mean_speed_mps") e.motion.mean_speed_mps = to_double(value, key);
  else if (key == "motion.speed_std") e.motion.speed_std = to_double(value, key);
  else if (key == "motion.turn_rate_std") e.motion.turn_rate_std = to_double(value, key);
  else if (key == "motion.duration_s") e.motion.duration_s = to_double(value, key);
  else if (key == "sample_rate_hz") e.sample_rate_hz = to_double(value, key);
  else if (key == "train_segments") e.train_segments = to_int(value, key);
  else if (key == "test_duration_s") e.test_duration_s = to_double(value, key);
  else if (key == "window_s") e.window_s = to_double(value, key);
  else if (key == "stride") e.stride = static_cast<std::size_t>(to_u64(value, key));
  else if (key == "noise_level") e.noise_level = to_int(value, key);
  else if (key == "padding") {
    if (value == "tdoa_padded") e.padding = PaddingMode::tdoa_padded;
    else if (value == "pre_synchronized") e.padding = PaddingMode::pre_synchronized;
    else throw std::invalid_argument(
        "config key padding must be tdoa_padded or pre_synchronized");
  }
  else if (key == "model_channels") e.model_channels = to_int(value, key);
  else if (key == "train.epochs") e.train.epochs = to_int(value, key);
  else if (key == "train.batch_pairs") e.train.batch_pairs = to_int(value, key);
  else if (key == "train.learning_rate") e.train.learning_rate = to_double(value, key);
  else if (key == "match.i_iter") e.match.i_iter = to_int(value, key);
  else if (key == "match.i_wt") e.match.i_wt = to_int(value, key);
  else if (key == "match.i_wl") e.match.i_wl = to_int(value, key);
  else if (key == "match.lambda") e.match.lambda = to_double(value, key);
  else if (key == "match.batch_size") e.match.batch_size = to_int(value, key);
  else if (key == "match.restart_rotations") e.match.restart_rotations = to_int(value, key);
  else if (key == "match.try_flips") e.match.try_flips = to_bool(value, key);
  else if (key == "match.lr_transform") e.match.lr_transform = to_double(value, key);
  else if (key == "match.lr_logits") e.match.lr_logits = to_double(value, key);
  else if (key == "match.sinkhorn_iters") e.match.sinkhorn_iters = to_int(value, key);
  else if (key == "match.eval_cap") e.match.eval_cap = to_int(value, key);
  else if (key == "match.refit_epochs") e.match.refit_epochs = to_int(value, key);
  else if (key == "map_cell_m") e.map_cell_m = to_double(value, key);
  else if (key == "map_samples") e.map_samples = to_int(value, key);
  else if (key == "map_ignore_obstacles") e.map_ignore_obstacles = to_bool(value, key);
  else if (key == "seed") e.seed = to_u64(value, key);
  else if (key == "dataset_dir") cfg.dataset_dir = std::string(value);
  else if (key == "map_image") cfg.map_image = std::string(value);
  else if (key == "out_dir") cfg.out_dir = std::string(value);
  else if (key == "threads") cfg.threads = to_int(value, key);
  else throw std::invalid_argument("unknown config key: " + key);
}

std::string_view strip_quotes(std::string_view v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
    return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace

PipelineConfig parse_config_text(const std::string& content,
                                 const std::string& origin) {
  PipelineConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  for (const auto raw : text::split(content, '\n')) {
    ++line_no;
    std::string_view line = text::trim(raw);
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = text::trim(line.substr(0, hash));
    if (line.empty()) continue;

    const auto where = origin + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("unterminated section header at " + where);
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      if (section.empty())
        throw std::invalid_argument("empty section header at " + where);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("expected key = value at " + where);
    const std::string key =
        (section.empty() ? "" : section + ".") +
        std::string(text::trim(line.substr(0, eq)));
    const std::string_view value = strip_quotes(text::trim(line.substr(eq + 1)));
    try {
      assign(cfg, key, value);
    } catch (const std::exception& ex) {
      // bad values are validation problems wherever the converter lives
      throw std::invalid_argument(std::string(ex.what()) + " at " + where);
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  return parse_config_text(text::read_file(path), path);
}

void apply_override(PipelineConfig& cfg, const std::string& key,
                    const std::string& value) {
  assign(cfg, key, value);
}

std::string config_text(const PipelineConfig& cfg) {
  std::string s = experiment_snapshot(cfg.experiment);
  if (!cfg.dataset_dir.empty()) s += "dataset_dir = " + cfg.dataset_dir + "\n";
  if (!cfg.map_image.empty()) s += "map_image = " + cfg.map_image + "\n";
  s += "out_dir = " + cfg.out_dir + "\n";
  s += "threads = " + std::to_string(cfg.threads) + "\n";
  return s;
}

std::uint64_t config_hash(const PipelineConfig& cfg) {
  std::string s = experiment_snapshot(cfg.experiment);
  if (!cfg.map_image.empty()) s += "map_image = " + cfg.map_image + "\n";
  return fnv1a64(s.data(), s.size());
}

}  // namespace velochart
