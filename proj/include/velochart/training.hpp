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
#include "velochart/network.hpp"
#include "velochart/velocity.hpp"

namespace velochart {

// 2D embedding of every dataset sample, one column per sample.
using ChannelChart = Eigen::Matrix2Xd;

struct TrainConfig {
  enum class Mode { charting, fingerprint };

  int epochs = 10000;      // pipeline desk configs use a few hundred
  int batch_pairs = 256;   // samples per batch in fingerprint mode
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  Mode mode = Mode::charting;
  bool verbose = false;  // epoch progress on stdout; never touches artifacts
};

struct TrainResult {
  ChannelChart chart;
  std::vector<double> loss_history;  // one mean loss per epoch
  std::string warning;
};

// Weighted Siamese distance loss for one pair: beta * |d - ||z_n - z_k||_2|.
// Both grids run through the model as one two-sample batch so the twins share
// batch statistics; with_grad accumulates parameter gradients.
double pair_loss(EmbeddingModel& model, const Eigen::MatrixXd& csi_n,
                 const Eigen::MatrixXd& csi_k, double d, double beta,
                 bool with_grad = true);

// Mean Euclidean label loss over a batch of samples; the fingerprinting
// objective. with_grad accumulates parameter gradients.
double label_loss(EmbeddingModel& model,
                  const std::vector<const Eigen::MatrixXd*>& batch,
                  const std::vector<Vec2>& labels, bool with_grad = true);

// Minimizes the weighted distance loss over shuffled mini-batches of sparse
// matrix entries. The model trains in place; optimizer state is passed in so
// callers can resume. Aborts with a diagnostic on NaN loss.
TrainResult train_chart(EmbeddingModel& model, const SegmentedDataset& data,
                        const SparseDistanceMatrix& sdm, const TrainConfig& cfg,
                        AdamState* resume_state = nullptr);

// Supervised baseline: minimizes mean ||z_i - p_i|| against ground truth.
TrainResult train_fingerprint(EmbeddingModel& model, const SegmentedDataset& data,
                              const TrainConfig& cfg,
                              AdamState* resume_state = nullptr);

// Infer-mode embeddings of every sample, batched.
ChannelChart compute_chart(EmbeddingModel& model, const SegmentedDataset& data,
                           int batch_size = 512);

// Sum of beta * |d - chart distance| over entries, normalized by the weighted
// distance mass. The unitless figure behind "stress dropped to x%".
double weighted_stress(const ChannelChart& chart, const SparseDistanceMatrix& sdm);

void save_loss_history(const std::string& path, const std::vector<double>& history);

}  // namespace velochart
