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

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "velochart/sinkhorn.hpp"

namespace velochart {

// Two-stage schedule: translation moves from the first epoch, rotation joins
// after i_wt, map logits after i_wl. Setting i_wl past i_iter freezes the
// map distribution entirely (the static-map ablation).
struct MatchSchedule {
  int i_iter = 150;
  int i_wt = 50;
  int i_wl = 100;
  double lambda = 30.0;
  int batch_size = 3000;
  int restart_rotations = 20;  // equidistant start angles in [0, 2pi)
  bool try_flips = true;       // adds the x- and y-mirrored variants
  double lr_transform = 0.05;
  double lr_logits = 0.01;
  int sinkhorn_iters = 50;
  int eval_cap = 3000;    // chart subsample shared by all restart scores
  int refit_epochs = 30;  // full-chart polish of the winning restart
};

struct EpochLog {
  double phi = 0.0;
  Vec2 t = Vec2::Zero();
  std::uint64_t logits_hash = 0;
  double mean_lm = 0.0;
};

struct RestartRecord {
  double start_rotation = 0.0;
  int flip = 0;  // 0 none, 1 x-axis, 2 y-axis
  LinearTransform transform;
  double final_lm = 0.0;  // scored on the shared evaluation subset
  std::vector<EpochLog> trace;
};

struct MatchResult {
  LinearTransform transform;    // winning restart after the full-chart refit
  MapDistribution learned_map;  // same points as the input, learned logits
  double best_lm = 0.0;         // exactly min over restarts[i].final_lm
  double refit_lm = 0.0;
  std::vector<RestartRecord> restarts;
};

// Multi-restart adaptive map matching: every rotation/flip variant starts
// with the transformed chart centroid on the map centroid, runs i_iter epochs
// of staged optimization over shuffled chart batches, and the variant with
// the smallest Sinkhorn distance wins.
MatchResult match_map(const Eigen::Matrix2Xd& chart, const MapDistribution& map,
                      const MatchSchedule& sched, std::uint64_t seed);

}  // namespace velochart
