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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "velochart/config.hpp"

namespace velochart {

// Chart CSV artifact: a "# config_hash = <hex>" stamp, an index,x,y header,
// then one row per sample. Reloading verifies the stamp against the run.
void save_chart_csv(const std::string& path, const ChannelChart& chart,
                    std::uint64_t hash);
struct LoadedChart {
  ChannelChart chart;
  std::uint64_t config_hash = 0;
};
LoadedChart load_chart_csv(const std::string& path);

// Stage commands behind the CLI; all paths come from the config. Each writes
// its artifacts under out_dir and prints a short summary to stdout.
void cmd_simulate(const PipelineConfig& cfg);
// resume reloads the checkpoint and trains resume_epochs more; 0 keeps the
// model untouched, so the rewritten chart files come out byte-identical.
void cmd_chart(const PipelineConfig& cfg, bool resume = false,
               int resume_epochs = 0);
void cmd_match(const PipelineConfig& cfg);
void cmd_fingerprint(const PipelineConfig& cfg);
void cmd_eval(const PipelineConfig& cfg, const std::vector<std::string>& suites,
              std::vector<int> noise_levels = {},
              std::vector<double> window_sizes = {},
              std::vector<int> bs_counts = {});

// Full argument parsing and dispatch. Exit codes: 0 success, 1 validation
// or usage, 2 runtime failure, 3 file problems.
int run_cli(int argc, const char* const* argv);

}  // namespace velochart
