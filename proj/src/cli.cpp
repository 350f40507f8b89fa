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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "velochart/common.hpp"
#include "velochart/pipeline.hpp"

namespace velochart {

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"velocity-based channel charting with adaptive map matching"};
  app.require_subcommand(1);

  std::string config_path, out_dir, map_image;
  std::uint64_t seed = 0;
  int threads = 1, noise_level = 0, epochs = 0, restarts = 0;
  double window_s = 0.0, lambda = 0.0;
  bool resume = false;
  std::vector<std::string> suites;
  std::vector<int> eval_levels, eval_bs;
  std::vector<double> eval_windows;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file");
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--threads", threads, "worker threads (1 = reproducible)");
    sub->add_option("--out", out_dir, "output directory override");
  };

  CLI::App* sim = app.add_subcommand(
      "simulate", "generate environment, recordings, and floor map");
  add_common(sim);

  CLI::App* cha = app.add_subcommand(
      "chart", "train the embedding and write the channel chart");
  add_common(cha);
  cha->add_option("--window-s", window_s, "velocity integration window");
  cha->add_option("--noise-level", noise_level, "velocity noise preset 0..4");
  cha->add_option("--epochs", epochs, "training epochs");
  cha->add_flag("--resume", resume, "continue from the saved checkpoint");

  CLI::App* mat = app.add_subcommand(
      "match", "align the chart with the floor map by optimal transport");
  add_common(mat);
  mat->add_option("--lambda", lambda, "transport entropy weight");
  mat->add_option("--restarts", restarts, "rotation restarts per flip variant");
  mat->add_option("--map-image", map_image, "external map image + JSON sidecar");

  CLI::App* fpr = app.add_subcommand(
      "fingerprint", "train the supervised position baseline");
  add_common(fpr);
  fpr->add_option("--epochs", epochs, "training epochs");

  CLI::App* evl = app.add_subcommand("eval", "run comparison suites");
  add_common(evl);
  evl->add_option("--suite", suites,
                  "map-matching, window-noise, bs-ablation (repeatable)");
  evl->add_option("--noise-level", eval_levels, "grid noise levels");
  evl->add_option("--window-s", eval_windows, "grid window sizes");
  evl->add_option("--bs-count", eval_bs, "ablation station counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string stage = sub->get_name();
  try {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);

    // CLI overrides apply only when the flag was actually given
    const auto given = [&](const char* name) {
      const CLI::Option* o = sub->get_option_no_throw(name);
      return o != nullptr && o->count() > 0;
    };
    if (given("--seed")) cfg.experiment.seed = seed;
    if (given("--threads")) cfg.threads = threads;
    if (given("--out")) cfg.out_dir = out_dir;
    if (given("--window-s") && sub != evl) cfg.experiment.window_s = window_s;
    if (given("--noise-level") && sub != evl)
      cfg.experiment.noise_level = noise_level;
    // under --resume, --epochs is extra work this invocation and stays out
    // of the experiment (and its hash); otherwise it IS the experiment
    int resume_epochs = 0;
    if (sub == cha && resume) {
      if (given("--epochs")) resume_epochs = epochs;
    } else if (given("--epochs")) {
      cfg.experiment.train.epochs = epochs;
    }
    if (given("--lambda")) cfg.experiment.match.lambda = lambda;
    if (given("--restarts"))
      cfg.experiment.match.restart_rotations = restarts;
    if (given("--map-image")) cfg.map_image = map_image;

    if (sub == sim) {
      cmd_simulate(cfg);
    } else if (sub == cha) {
      cmd_chart(cfg, resume, resume_epochs);
    } else if (sub == mat) {
      cmd_match(cfg);
    } else if (sub == fpr) {
      cmd_fingerprint(cfg);
    } else {
      cmd_eval(cfg, suites, eval_levels, eval_windows, eval_bs);
    }
  } catch (const io_error& e) {
    std::cerr << stage << ": file error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << stage << ": invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << stage << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace velochart
