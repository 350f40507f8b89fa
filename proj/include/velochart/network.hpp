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
#include <optional>
#include <string>
#include <vector>

namespace velochart {

enum class RunMode { train, infer };

// Scratch space for one batched forward/backward pass. Reused across batches
// so training allocates only when the batch size changes.
struct ForwardCache;

// Adam-style moment estimates over one flat parameter vector.
struct AdamState {
  Eigen::VectorXd m, v;
  std::int64_t step = 0;
};

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// The Siamese embedding network: four 1D convolutions over the delay axis
// (kernels 3/5/7/10, same padding, batch norm + ReLU each), global average
// pooling, a 200-wide hidden layer, and a linear 2D head. All trainable
// parameters live in one flat vector with a parallel gradient vector.
class EmbeddingModel {
 public:
  static constexpr int kConvLayers = 4;
  static constexpr int kKernels[kConvLayers] = {3, 5, 7, 10};
  static constexpr int kHidden = 200;
  static constexpr double kBnEps = 1e-5;
  static constexpr double kBnMomentum = 0.1;

  // Named slice of the flat parameter vector (or of the running statistics).
  struct Block {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
  };

  EmbeddingModel() = default;

  // Kaiming-uniform fan-in weights, zero biases, unit batch-norm scale;
  // deterministic per seed.
  static EmbeddingModel init(int n_antennas, int n_bins, int channels,
                             std::uint64_t seed);

  int antennas() const { return n_antennas_; }
  int bins() const { return n_bins_; }
  int channels() const { return channels_; }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(params_.size());
  }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::VectorXd& gradients() { return grads_; }
  const Eigen::VectorXd& gradients() const { return grads_; }
  void zero_gradients() { grads_.setZero(); }

  const std::vector<Block>& parameter_blocks() const { return blocks_; }
  const Block& block(const std::string& name) const;

  // Running batch-norm statistics, one mean/var pair per conv layer.
  Eigen::VectorXd& running_mean(int layer) { return run_mean_[layer]; }
  Eigen::VectorXd& running_var(int layer) { return run_var_[layer]; }
  const Eigen::VectorXd& running_mean(int layer) const { return run_mean_[layer]; }
  const Eigen::VectorXd& running_var(int layer) const { return run_var_[layer]; }

  // Batched forward pass over gathered CSI grids (each n_antennas x n_bins,
  // linear power). Returns the 2xB embedding matrix. Train mode uses batch
  // statistics, records everything needed for backward() into the cache, and
  // advances the running statistics; infer mode is pure.
  Eigen::MatrixXd forward(const std::vector<const Eigen::MatrixXd*>& batch,
                          RunMode mode, ForwardCache* cache = nullptr);

  // Accumulates parameter gradients for dL/dz (2xB) into gradients().
  void backward(const Eigen::MatrixXd& dz, ForwardCache& cache);

 private:
  void layout(int n_antennas, int n_bins, int channels);

  int n_antennas_ = 0;
  int n_bins_ = 0;
  int channels_ = 0;
  Eigen::VectorXd params_, grads_;
  std::vector<Block> blocks_;
  std::vector<Eigen::VectorXd> run_mean_, run_var_;

  friend struct ForwardCache;
};

Eigen::Vector2d embed(EmbeddingModel& model, const Eigen::MatrixXd& csi_grid,
                      RunMode mode);

// The input transform applied before the first convolution: compresses the
// raw linear-power dynamic range and maps zero to zero.
double scale_csi_power(double linear_power);

// Checkpoint container: dimensions and named little-endian f32 blocks.
// Loading therefore rounds parameters through f32; chart outputs meant to be
// reproducible across save/load must be computed from a reloaded model.
void save_model(const std::string& path, const EmbeddingModel& model,
                std::optional<std::uint64_t> config_hash,
                const AdamState* adam = nullptr);

struct LoadedModel {
  EmbeddingModel model;
  std::optional<std::uint64_t> config_hash;
  std::optional<AdamState> adam;
};
LoadedModel load_model(const std::string& path);

struct ForwardCache {
  // gathered, scaled input and per-layer activations
  Eigen::MatrixXd x0;                    // (C_in, B*L)
  std::vector<Eigen::MatrixXd> im2col;   // per conv layer
  std::vector<Eigen::MatrixXd> xhat;     // normalized pre-scale activations
  std::vector<Eigen::MatrixXd> act;      // post-ReLU activations
  std::vector<Eigen::VectorXd> mean, inv_std;
  Eigen::MatrixXd pooled;                // (C, B)
  Eigen::MatrixXd fc1_out;               // post-ReLU (hidden, B)
  Eigen::MatrixXd z;                     // (2, B)
  Eigen::Index batch = 0;

  // backward scratch
  Eigen::MatrixXd d_cols, d_im2col, d_pooled, d_fc1;
};

}  // namespace velochart
