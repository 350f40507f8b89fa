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
#include <string>
#include <vector>

#include "velochart/dataset.hpp"
#include "velochart/environment.hpp"
#include "velochart/mapdist.hpp"
#include "velochart/matching.hpp"
#include "velochart/trajectory.hpp"
#include "velochart/training.hpp"
#include "velochart/velocity.hpp"

namespace velochart {

// 90th percentile of the per-point Euclidean error, nearest-rank convention:
// sorted errors indexed at ceil(0.9 N) - 1.
double ce90(const Eigen::Matrix2Xd& predicted, const Eigen::Matrix2Xd& truth);

// Nearest-rank deciles p10 .. p100 of the error distribution, ten values.
Eigen::VectorXd error_deciles(const Eigen::Matrix2Xd& predicted,
                              const Eigen::Matrix2Xd& truth);

// One synthetic experiment: environment, motion model, recording layout,
// charting and matching hyperparameters. Every suite below derives all of
// its randomness from seed, so a config fully determines a report.
struct ExperimentConfig {
  EnvironmentSpec env;
  MotionSpec motion;              // duration_s is the per-segment length
  double sample_rate_hz = 10.0;
  int train_segments = 2;
  double test_duration_s = 60.0;
  double window_s = 15.0;
  std::size_t stride = 1;
  int noise_level = 0;
  PaddingMode padding = PaddingMode::tdoa_padded;
  int model_channels = 8;
  TrainConfig train;
  MatchSchedule match;
  double map_cell_m = 0.5;
  int map_samples = 600;
  bool map_ignore_obstacles = false;  // keep blocked rooms in the map
  std::uint64_t seed = 1;
};

// Canonical key = value serialization of an experiment config. Its hash
// stamps every artifact a run produces, so equal text means equal experiment.
std::string experiment_snapshot(const ExperimentConfig& cfg);

// Synthesizes one recording along a trajectory: per-sample channel grids with
// the configured delay alignment, plus timestamps and ground-truth positions.
Dataset synthesize_dataset(const Environment& env, const Trajectory& traj,
                           PaddingMode padding);

// The simulated world a suite runs against.
struct Scenario {
  Environment env;
  SegmentedDataset train_data;
  SegmentedDataset test_data;  // one held-out segment
  OccupancyGrid grid;
  MapDistribution map;
};

Scenario build_scenario(const ExperimentConfig& cfg);

// Velocity-derived sparse distances over every train segment: ground truth
// differenced, pushed through the noise preset, then integrated per window.
SparseDistanceMatrix build_noisy_sdm(const SegmentedDataset& data,
                                     double window_s, std::size_t stride,
                                     int noise_level);

struct ReportEntry {
  std::string method;
  double window_s = 0.0;
  int noise_level = -1;
  int bs_count = 0;
  double ce90_m = 0.0;
  Eigen::VectorXd deciles;  // p10 .. p100
  double runtime_s = 0.0;
  std::string error;  // non-empty marks a failed cell
};

struct ExperimentReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::string config_snapshot;   // key = value lines
  std::uint64_t config_hash = 0; // hash of the snapshot text
  double total_runtime_s = 0.0;
  std::vector<ReportEntry> entries;
};

void save_report_json(const std::string& path, const ExperimentReport& report);
void save_report_csv(const std::string& path, const ExperimentReport& report);

// Charting quality per (noise level, window size) cell: train on the sparse
// distances, align with ground truth, report the held-out CE90. Cells run
// independently with seeds derived from (config seed, cell index); failures
// are recorded in the cell, not thrown.
ExperimentReport run_matrix(const ExperimentConfig& cfg,
                            const std::vector<int>& noise_levels,
                            const std::vector<double>& window_sizes,
                            int threads = 1);

// Localization comparison on one scenario. Methods: "ours" (transport
// matching with map adaptation), "static_map" (map gate never opens),
// "combined" (network trained on distance plus transport loss jointly),
// "least_sq" (ground-truth alignment of the chart), "fingerprint"
// (supervised regression).
ExperimentReport run_map_matching_suite(const ExperimentConfig& cfg,
                                        const std::vector<std::string>& methods);

// Mean Pearson correlation between per-station rows across samples.
// Zero-variance rows contribute 0 and set the warning.
Eigen::MatrixXd bs_correlation(const std::vector<Eigen::MatrixXd>& samples,
                               std::string* warning = nullptr);

// Charting and fingerprinting CE90 as the station count varies; stations are
// kept in prefix order. Counts below 2 are rejected, delay alignment needs a
// reference pair.
ExperimentReport run_bs_ablation(const ExperimentConfig& cfg,
                                 const std::vector<int>& bs_counts);

// Figures: chart scatter colored by true position, map heatmap of the
// learned weights, and predicted-vs-truth overlay in the world frame.
std::string render_chart_svg(const ChannelChart& chart,
                             const Eigen::Matrix2Xd& truth);
std::string render_map_svg(const MapDistribution& map, const OccupancyGrid& grid);
std::string render_overlay_svg(const Environment& env,
                               const Eigen::Matrix2Xd& predicted,
                               const Eigen::Matrix2Xd& truth);

}  // namespace velochart
