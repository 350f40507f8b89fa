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

#include "velochart/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>

#include "json.hpp"
#include "velochart/common.hpp"
#include "velochart/rng.hpp"
#include "velochart/textio.hpp"
#include "velochart/transform.hpp"

namespace velochart {

namespace fs = std::filesystem;

namespace {

using Eigen::Index;
using Eigen::Matrix2Xd;

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory " + dir.string());
}

fs::path data_dir(const PipelineConfig& cfg) {
  return cfg.dataset_dir.empty() ? fs::path(cfg.out_dir)
                                 : fs::path(cfg.dataset_dir);
}

void verify_hash(const std::optional<std::uint64_t>& found,
                 std::uint64_t expected, const std::string& path) {
  // imported artifacts without a stamp pass; a wrong stamp never does
  if (found.has_value() && *found != expected)
    throw io_error("config hash mismatch in " + path + ": run " +
                   text::fmt_hex(expected) + ", artifact " +
                   text::fmt_hex(*found) +
                   "; re-run the producing stage or fix the config");
}

SegmentedDataset load_train_data(const fs::path& dir, std::uint64_t expected) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("train_", 0) == 0 &&
        name.size() > 5 && name.substr(name.size() - 5) == ".ccds")
      files.push_back(entry.path());
  }
  if (ec) throw io_error("cannot list " + dir.string());
  if (files.empty())
    throw io_error("no train_*.ccds recordings in " + dir.string());
  std::sort(files.begin(), files.end());

  SegmentedDataset data;
  for (const fs::path& f : files) {
    LoadedDataset loaded = load_dataset(f.string());
    verify_hash(loaded.config_hash, expected, f.string());
    data.segments.push_back(std::move(loaded.data));
  }
  return data;
}

Dataset load_test_data(const fs::path& dir, std::uint64_t expected) {
  const fs::path f = dir / "test.ccds";
  LoadedDataset loaded = load_dataset(f.string());
  verify_hash(loaded.config_hash, expected, f.string());
  return std::move(loaded.data);
}

Matrix2Xd positions_of(const SegmentedDataset& data) {
  const std::size_t n = data.total_samples();
  Matrix2Xd out(2, static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    out.col(static_cast<Index>(i)) = data.position_at(i);
  return out;
}

// environment artifact with the run stamp injected next to the body
void save_environment_stamped(const std::string& path, const Environment& env,
                              std::uint64_t hash) {
  auto j = nlohmann::json::parse(environment_to_json(env));
  j["config_hash"] = text::fmt_hex(hash);
  text::write_file(path, j.dump(2) + "\n");
}

Environment load_environment_stamped(const std::string& path,
                                     std::uint64_t expected) {
  const std::string body = text::read_file(path);
  std::optional<std::uint64_t> found;
  try {
    const auto j = nlohmann::json::parse(body);
    if (j.contains("config_hash"))
      found = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  } catch (const std::exception&) {
    // malformed stamps surface through environment_from_json below
  }
  const Environment env = environment_from_json(body);
  verify_hash(found, expected, path);
  return env;
}

// map source selection: an external image wins over the simulated plan
OccupancyGrid load_map_grid(const PipelineConfig& cfg, std::uint64_t hash) {
  if (!cfg.map_image.empty()) {
    fs::path sidecar(cfg.map_image);
    sidecar.replace_extension(".json");
    return load_occupancy(cfg.map_image, sidecar.string());
  }
  const Environment env = load_environment_stamped(
      (data_dir(cfg) / "environment.json").string(), hash);
  return rasterize_environment(env, cfg.experiment.map_cell_m,
                               cfg.experiment.map_ignore_obstacles);
}

std::string row(const std::string& name, const Dataset& ds) {
  const auto stats = ds.speed_stats();
  const double dur =
      ds.timestamps.empty() ? 0.0 : ds.timestamps.back() - ds.timestamps.front();
  std::string s = name;
  s.resize(std::max<std::size_t>(s.size() + 2, 12), ' ');
  s += text::fmt(std::uint64_t(ds.size())) + " samples, " +
       text::fmt_fixed(dur, 1) + " s, speed " + text::fmt_fixed(stats.mean, 2) +
       " +- " + text::fmt_fixed(stats.stddev, 2) + " m/s";
  return s;
}

}  // namespace

void save_chart_csv(const std::string& path, const ChannelChart& chart,
                    std::uint64_t hash) {
  std::string s = "# config_hash = " + text::fmt_hex(hash) + "\nindex,x,y\n";
  for (Index i = 0; i < chart.cols(); ++i)
    s += text::fmt(std::uint64_t(i)) + "," + text::fmt(chart(0, i)) + "," +
         text::fmt(chart(1, i)) + "\n";
  text::write_file(path, s);
}

LoadedChart load_chart_csv(const std::string& path) {
  const std::string body = text::read_file(path);
  const auto lines = text::split(body, '\n');
  if (lines.size() < 2 || lines[0].rfind("# config_hash = ", 0) != 0)
    throw io_error("missing config stamp in " + path);
  LoadedChart out;
  try {
    out.config_hash =
        std::stoull(std::string(lines[0].substr(16)), nullptr, 16);
  } catch (const std::exception&) {
    throw io_error("bad config stamp in " + path);
  }
  if (text::trim(lines[1]) != "index,x,y")
    throw io_error("unexpected chart header in " + path);

  std::vector<Vec2> pts;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != 3) throw io_error("bad chart row in " + path);
    pts.emplace_back(text::parse_double(cells[1], path),
                     text::parse_double(cells[2], path));
  }
  out.chart.resize(2, static_cast<Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i)
    out.chart.col(static_cast<Index>(i)) = pts[i];
  return out;
}

void cmd_simulate(const PipelineConfig& cfg) {
  const std::uint64_t hash = config_hash(cfg);
  const fs::path dir = data_dir(cfg);
  make_dir(dir);

  const Scenario sc = build_scenario(cfg.experiment);
  save_environment_stamped((dir / "environment.json").string(), sc.env, hash);
  save_occupancy((dir / "map.pgm").string(), (dir / "map.json").string(),
                 sc.grid);

  std::cout << "environment " << text::fmt(sc.env.bounds.width()) << " x "
            << text::fmt(sc.env.bounds.height()) << " m, "
            << sc.env.base_stations.size() << " base stations, "
            << sc.env.scatterers.size() << " scatterers\n";
  for (std::size_t i = 0; i < sc.train_data.segments.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "train_%03zu", i);
    save_dataset((dir / (std::string(name) + ".ccds")).string(),
                 sc.train_data.segments[i], hash);
    std::cout << row(name, sc.train_data.segments[i]) << "\n";
  }
  save_dataset((dir / "test.ccds").string(), sc.test_data.segments.at(0), hash);
  std::cout << row("test", sc.test_data.segments.at(0)) << "\n";
  std::cout << "config " << text::fmt_hex(hash) << ", map "
            << sc.grid.free_count() << " free cells -> " << dir.string()
            << "\n";
}

void cmd_chart(const PipelineConfig& cfg, bool resume, int resume_epochs) {
  const std::uint64_t hash = config_hash(cfg);
  const ExperimentConfig& ex = cfg.experiment;
  const fs::path dir = data_dir(cfg);
  const fs::path out = cfg.out_dir;
  make_dir(out);

  const SegmentedDataset train = load_train_data(dir, hash);
  SegmentedDataset test;
  test.segments.push_back(load_test_data(dir, hash));

  const SparseDistanceMatrix sdm =
      build_noisy_sdm(train, ex.window_s, ex.stride, ex.noise_level);
  if (!sdm.warning.empty()) std::cout << "warning: " << sdm.warning << "\n";
  save_sdm_binary((out / "sdm.bin").string(), sdm, hash);

  const fs::path ckpt = out / "model.ckpt";
  EmbeddingModel model;
  AdamState adam;
  // seed derivation shared with the comparison suite so the stages agree
  const std::uint64_t stage_seed = derive_seed(ex.seed, 0xc4a27000);
  if (resume) {
    LoadedModel loaded = load_model(ckpt.string());
    verify_hash(loaded.config_hash, hash, ckpt.string());
    model = std::move(loaded.model);
    if (loaded.adam.has_value()) adam = std::move(*loaded.adam);
  } else {
    model = EmbeddingModel::init(
        static_cast<int>(train.segments.at(0).n_antennas),
        static_cast<int>(train.segments.at(0).n_bins), ex.model_channels,
        derive_seed(stage_seed, 1));
  }

  TrainConfig tc = ex.train;
  tc.mode = TrainConfig::Mode::charting;
  tc.seed = derive_seed(stage_seed, 2);
  if (resume) tc.epochs = resume_epochs;  // extra work, not a new experiment
  if (tc.epochs > 0) {
    const TrainResult res = train_chart(model, train, sdm, tc, &adam);
    if (!res.warning.empty()) std::cout << "warning: " << res.warning << "\n";
    save_loss_history((out / "loss_history.csv").string(), res.loss_history);
    if (!res.loss_history.empty())
      std::cout << "trained " << res.loss_history.size()
                << " epochs, final loss " << text::fmt(res.loss_history.back())
                << "\n";
  } else {
    std::cout << (resume ? "resume with 0 epochs, model left unchanged\n"
                         : "0 epochs requested, untrained model saved\n");
  }
  save_model(ckpt.string(), model, hash, &adam);

  // charts come from the reloaded checkpoint: parameters round through f32 on
  // disk, so this is the embedding every later stage can reproduce exactly
  EmbeddingModel canonical = load_model(ckpt.string()).model;
  const ChannelChart chart_train = compute_chart(canonical, train);
  const ChannelChart chart_test = compute_chart(canonical, test);
  save_chart_csv((out / "chart_train.csv").string(), chart_train, hash);
  save_chart_csv((out / "chart_test.csv").string(), chart_test, hash);
  if (train.all_have_positions())
    text::write_file((out / "chart.svg").string(),
                     render_chart_svg(chart_train, positions_of(train)));

  std::cout << "chart stress " << text::fmt_fixed(
                   100.0 * weighted_stress(chart_train, sdm), 2)
            << "% over " << sdm.entries.size() << " pairs (window "
            << text::fmt(ex.window_s) << " s, noise level " << ex.noise_level
            << ")\n"
            << "wrote " << (out / "model.ckpt").string() << ", chart csvs, "
            << "loss history\n";
}

void cmd_match(const PipelineConfig& cfg) {
  const std::uint64_t hash = config_hash(cfg);
  const ExperimentConfig& ex = cfg.experiment;
  const fs::path out = cfg.out_dir;
  make_dir(out);

  const LoadedChart train_chart = load_chart_csv((out / "chart_train.csv").string());
  verify_hash(train_chart.config_hash, hash, (out / "chart_train.csv").string());
  const LoadedChart test_chart = load_chart_csv((out / "chart_test.csv").string());
  verify_hash(test_chart.config_hash, hash, (out / "chart_test.csv").string());

  const OccupancyGrid grid = load_map_grid(cfg, hash);
  const MapDistribution map =
      map_from_grid(grid, ex.map_samples, derive_seed(ex.seed, 0x6d617000));

  const MatchResult res = match_map(train_chart.chart, map, ex.match,
                                    derive_seed(ex.seed, 0x6f757273));

  nlohmann::ordered_json j;
  j["config_hash"] = text::fmt_hex(hash);
  j["t"] = {res.transform.t.x(), res.transform.t.y()};
  j["phi"] = res.transform.phi;
  j["flip_x"] = res.transform.flip_x;
  j["flip_y"] = res.transform.flip_y;
  j["best_lm"] = res.best_lm;
  j["refit_lm"] = res.refit_lm;
  j["restarts"] = res.restarts.size();
  text::write_file((out / "transform.json").string(), j.dump(2) + "\n");

  export_map_csv((out / "learned_map.csv").string(), res.learned_map);
  const Matrix2Xd world = apply_transform(res.transform, test_chart.chart);
  save_chart_csv((out / "positions.csv").string(), world, hash);
  text::write_file((out / "map_heat.svg").string(),
                   render_map_svg(res.learned_map, grid));

  std::cout << "matched over " << res.restarts.size() << " restarts: phi "
            << text::fmt_fixed(res.transform.phi, 4) << ", t ("
            << text::fmt_fixed(res.transform.t.x(), 3) << ", "
            << text::fmt_fixed(res.transform.t.y(), 3) << ")"
            << (res.transform.flip_x ? ", x flip" : "")
            << (res.transform.flip_y ? ", y flip" : "") << "\n"
            << "transport cost " << text::fmt(res.best_lm) << " -> "
            << text::fmt(res.refit_lm) << " after refit\n";

  // scored only when the held-out recording carries ground truth
  const fs::path test_file = data_dir(cfg) / "test.ccds";
  if (fs::exists(test_file)) {
    const Dataset test = load_test_data(data_dir(cfg), hash);
    if (test.has_positions() && static_cast<Index>(test.size()) == world.cols()) {
      SegmentedDataset wrap;
      wrap.segments.push_back(test);
      const Matrix2Xd truth = positions_of(wrap);
      std::cout << "test CE90 " << text::fmt_fixed(ce90(world, truth), 3)
                << " m\n";
      text::write_file((out / "overlay.svg").string(),
                       render_overlay_svg(load_environment_stamped(
                                              (data_dir(cfg) / "environment.json").string(), hash),
                                          world, truth));
    }
  }
}

void cmd_fingerprint(const PipelineConfig& cfg) {
  const std::uint64_t hash = config_hash(cfg);
  const ExperimentConfig& ex = cfg.experiment;
  const fs::path dir = data_dir(cfg);
  const fs::path out = cfg.out_dir;
  make_dir(out);

  const SegmentedDataset train = load_train_data(dir, hash);
  SegmentedDataset test;
  test.segments.push_back(load_test_data(dir, hash));

  EmbeddingModel model = EmbeddingModel::init(
      static_cast<int>(train.segments.at(0).n_antennas),
      static_cast<int>(train.segments.at(0).n_bins), ex.model_channels,
      derive_seed(ex.seed, 0xf1997001));
  TrainConfig tc = ex.train;
  tc.mode = TrainConfig::Mode::fingerprint;
  tc.seed = derive_seed(ex.seed, 0xf1997002);
  const TrainResult res = train_fingerprint(model, train, tc);
  save_model((out / "fp_model.ckpt").string(), model, hash);
  save_loss_history((out / "fp_loss_history.csv").string(), res.loss_history);

  EmbeddingModel canonical = load_model((out / "fp_model.ckpt").string()).model;
  const Matrix2Xd predicted = compute_chart(canonical, test);
  save_chart_csv((out / "fp_positions.csv").string(), predicted, hash);

  std::cout << "fingerprint trained " << res.loss_history.size()
            << " epochs, final loss "
            << text::fmt(res.loss_history.empty() ? 0.0
                                                  : res.loss_history.back())
            << "\n";
  if (test.segments[0].has_positions()) {
    const Matrix2Xd truth = positions_of(test);
    std::cout << "test CE90 " << text::fmt_fixed(ce90(predicted, truth), 3)
              << " m\n";
  }
}

void cmd_eval(const PipelineConfig& cfg, const std::vector<std::string>& suites,
              std::vector<int> noise_levels, std::vector<double> window_sizes,
              std::vector<int> bs_counts) {
  if (suites.empty())
    throw std::invalid_argument(
        "no suites selected (use map-matching, window-noise, bs-ablation)");
  for (const std::string& s : suites)
    if (s != "map-matching" && s != "window-noise" && s != "bs-ablation")
      throw std::invalid_argument("unknown suite: " + s);

  const fs::path out = cfg.out_dir;
  make_dir(out);
  if (noise_levels.empty()) noise_levels = {0, 1, 2, 3, 4};
  if (window_sizes.empty()) window_sizes = {5.0, 15.0, 30.0, 60.0};
  if (bs_counts.empty()) {
    bs_counts = {2};
    if (cfg.experiment.env.bs_count > 2)
      bs_counts.push_back(cfg.experiment.env.bs_count);
  }

  for (const std::string& s : suites) {
    ExperimentReport rep;
    if (s == "map-matching")
      rep = run_map_matching_suite(
          cfg.experiment,
          {"ours", "static_map", "combined", "least_sq", "fingerprint"});
    else if (s == "window-noise")
      rep = run_matrix(cfg.experiment, noise_levels, window_sizes, cfg.threads);
    else
      rep = run_bs_ablation(cfg.experiment, bs_counts);

    const std::string stem = "report_" + rep.suite;
    save_report_json((out / (stem + ".json")).string(), rep);
    save_report_csv((out / (stem + ".csv")).string(), rep);

    std::cout << "suite " << rep.suite << " ("
              << text::fmt_fixed(rep.total_runtime_s, 1) << " s):\n";
    for (const ReportEntry& e : rep.entries) {
      std::string label = e.method;
      if (rep.suite == "window_noise")
        label += " w=" + text::fmt(e.window_s) + " n=" +
                 std::to_string(e.noise_level);
      if (rep.suite == "bs_ablation")
        label += " bs=" + std::to_string(e.bs_count);
      label.resize(std::max<std::size_t>(label.size() + 2, 28), ' ');
      if (e.error.empty())
        std::cout << "  " << label << "CE90 "
                  << text::fmt_fixed(e.ce90_m, 3) << " m\n";
      else
        std::cout << "  " << label << "failed: " << e.error << "\n";
    }
    std::cout << "report: " << (out / (stem + ".json")).string() << "\n";
  }
}

}  // namespace velochart
