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

#include "velochart/eval.hpp"

namespace velochart {

// Everything a run needs: the experiment itself plus artifact plumbing.
// The plumbing fields (paths, threads) never enter the config hash, so two
// runs of the same experiment in different directories share their hash.
struct PipelineConfig {
  ExperimentConfig experiment;
  std::string dataset_dir;  // where simulate writes and chart reads; out_dir if empty
  std::string map_image;    // external floor plan (png or pgm with sidecar)
  std::string out_dir = "out";
  int threads = 1;
};

// Key = value tree with [section] headers, # comments, and bare or quoted
// values. Keys are the canonical snapshot names (env.width_m, match.lambda,
// seed, ...); unknown keys are rejected with the offending name.
PipelineConfig parse_config_text(const std::string& text,
                                 const std::string& origin);
PipelineConfig load_config(const std::string& path);

// One CLI override, same key space as the file format.
void apply_override(PipelineConfig& cfg, const std::string& key,
                    const std::string& value);

// Canonical serialization; parsing it back yields an equivalent config.
std::string config_text(const PipelineConfig& cfg);

// Hash stamped on every artifact: the experiment snapshot plus the external
// map reference when one is set.
std::uint64_t config_hash(const PipelineConfig& cfg);

}  // namespace velochart
