// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/network.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "velochart/binio.hpp"
#include "velochart/common.hpp"
#include "velochart/rng.hpp"

namespace velochart {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using MapMat = Eigen::Map<MatrixXd>;
using CMapMat = Eigen::Map<const MatrixXd>;

MapMat view(VectorXd& v, const EmbeddingModel::Block& b) {
  return MapMat(v.data() + b.offset, static_cast<Index>(b.rows),
                static_cast<Index>(b.cols));
}

CMapMat view(const VectorXd& v, const EmbeddingModel::Block& b) {
  return CMapMat(v.data() + b.offset, static_cast<Index>(b.rows),
                 static_cast<Index>(b.cols));
}

}  // namespace

double scale_csi_power(double linear_power) {
  return std::log1p(linear_power * 1e6) * 0.2;
}

void adam_step(VectorXd& params, const VectorXd& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (state.m.size() == 0) {
    state.m = VectorXd::Zero(params.size());
    state.v = VectorXd::Zero(params.size());
  }
  if (state.m.size() != params.size() || grads.size() != params.size())
    throw std::invalid_argument("adam state does not match the parameter vector");
  ++state.step;
  state.m = beta1 * state.m + (1.0 - beta1) * grads;
  state.v = beta2 * state.v + (1.0 - beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  params.array() -=
      lr * (state.m.array() / c1) /
      ((state.v.array() / c2).sqrt() + eps);
}

void EmbeddingModel::layout(int n_antennas, int n_bins, int channels) {
  n_antennas_ = n_antennas;
  n_bins_ = n_bins;
  channels_ = channels;
  blocks_.clear();

  std::size_t off = 0;
  const auto add = [&](const std::string& name, std::size_t r, std::size_t c) {
    blocks_.push_back({name, off, r, c});
    off += r * c;
  };
  for (int l = 0; l < kConvLayers; ++l) {
    const int c_in = l == 0 ? n_antennas : channels;
    const std::string tag = std::to_string(l + 1);
    add("conv" + tag + ".w", static_cast<std::size_t>(channels),
        static_cast<std::size_t>(c_in * kKernels[l]));
    add("conv" + tag + ".b", static_cast<std::size_t>(channels), 1);
    add("bn" + tag + ".gamma", static_cast<std::size_t>(channels), 1);
    add("bn" + tag + ".beta", static_cast<std::size_t>(channels), 1);
  }
  add("fc1.w", kHidden, static_cast<std::size_t>(channels));
  add("fc1.b", kHidden, 1);
  add("fc2.w", 2, kHidden);
  add("fc2.b", 2, 1);

  params_ = VectorXd::Zero(static_cast<Index>(off));
  grads_ = VectorXd::Zero(static_cast<Index>(off));
  run_mean_.assign(kConvLayers, VectorXd::Zero(channels));
  run_var_.assign(kConvLayers, VectorXd::Ones(channels));
}

const EmbeddingModel::Block& EmbeddingModel::block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw std::invalid_argument("unknown parameter block " + name);
}

EmbeddingModel EmbeddingModel::init(int n_antennas, int n_bins, int channels,
                                    std::uint64_t seed) {
  if (n_antennas <= 0 || n_bins <= 0 || channels <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (n_bins < kKernels[kConvLayers - 1])
    throw std::invalid_argument("delay window shorter than the largest kernel");

  EmbeddingModel m;
  m.layout(n_antennas, n_bins, channels);

  std::uint64_t salt = 0;
  for (const auto& b : m.blocks_) {
    const bool weight = b.name.ends_with(".w");
    const bool gamma = b.name.ends_with(".gamma");
    auto w = view(m.params_, b);
    if (weight) {
      Rng rng(derive_seed(seed, 0xc0de0000 + salt));
      const double bound = std::sqrt(6.0 / static_cast<double>(b.cols));
      for (Index c = 0; c < w.cols(); ++c)
        for (Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
    } else if (gamma) {
      w.setOnes();
    }  // biases and bn shifts stay zero
    ++salt;
  }
  return m;
}

MatrixXd EmbeddingModel::forward(const std::vector<const MatrixXd*>& batch,
                                 RunMode mode, ForwardCache* cache) {
  const Index bsz = static_cast<Index>(batch.size());
  if (bsz == 0) throw std::invalid_argument("empty forward batch");
  const Index L = n_bins_;
  const Index cols = bsz * L;

  ForwardCache local;
  ForwardCache& cc = cache ? *cache : local;
  cc.batch = bsz;
  cc.im2col.resize(kConvLayers);
  cc.xhat.resize(kConvLayers);
  cc.act.resize(kConvLayers);
  cc.mean.resize(kConvLayers);
  cc.inv_std.resize(kConvLayers);

  cc.x0.resize(n_antennas_, cols);
  for (Index b = 0; b < bsz; ++b) {
    const MatrixXd& g = *batch[static_cast<std::size_t>(b)];
    if (g.rows() != n_antennas_ || g.cols() != L)
      throw std::invalid_argument("csi grid shape does not match the model");
    cc.x0.middleCols(b * L, L) =
        g.unaryExpr([](double x) { return scale_csi_power(x); });
  }

  const MatrixXd* input = &cc.x0;
  for (int l = 0; l < kConvLayers; ++l) {
    const Index c_in = l == 0 ? n_antennas_ : channels_;
    const Index k = kKernels[l];
    const Index pad = (k - 1) / 2;

    MatrixXd& im = cc.im2col[l];
    im.setZero(c_in * k, cols);
    for (Index j = 0; j < k; ++j) {
      const Index shift = j - pad;  // source position = output position + shift
      const Index lo = std::max<Index>(0, -shift);
      const Index hi = std::min<Index>(L, L - shift);
      if (hi <= lo) continue;
      for (Index b = 0; b < bsz; ++b) {
        im.block(j * c_in, b * L + lo, c_in, hi - lo) =
            input->block(0, b * L + lo + shift, c_in, hi - lo);
      }
    }

    const auto W = view(params_, block("conv" + std::to_string(l + 1) + ".w"));
    const auto bias = view(params_, block("conv" + std::to_string(l + 1) + ".b"));
    MatrixXd y;
    y.noalias() = W * im;
    y.colwise() += bias.col(0);

    const auto gamma = view(params_, block("bn" + std::to_string(l + 1) + ".gamma"));
    const auto beta = view(params_, block("bn" + std::to_string(l + 1) + ".beta"));

    VectorXd mean(channels_), var(channels_);
    if (mode == RunMode::train) {
      const double inv_m = 1.0 / static_cast<double>(cols);
      for (Index c = 0; c < channels_; ++c) {
        // per-sample partial sums keep the statistic invariant under swapping
        // the two twins of a pair (addition stays commutative)
        double s1 = 0.0, s2 = 0.0;
        for (Index b = 0; b < bsz; ++b) {
          const auto seg = y.row(c).segment(b * L, L);
          s1 += seg.sum();
          s2 += seg.squaredNorm();
        }
        mean[c] = s1 * inv_m;
        var[c] = std::max(0.0, s2 * inv_m - mean[c] * mean[c]);
      }
      run_mean_[l] = (1.0 - kBnMomentum) * run_mean_[l] + kBnMomentum * mean;
      run_var_[l] = (1.0 - kBnMomentum) * run_var_[l] + kBnMomentum * var;
    } else {
      mean = run_mean_[l];
      var = run_var_[l];
    }
    VectorXd inv_std = (var.array() + kBnEps).rsqrt();

    MatrixXd& xh = cc.xhat[l];
    xh = ((y.colwise() - mean).array().colwise() * inv_std.array()).matrix();
    MatrixXd& a = cc.act[l];
    a = ((xh.array().colwise() * gamma.col(0).array()).colwise() +
         beta.col(0).array())
            .max(0.0)
            .matrix();

    cc.mean[l] = std::move(mean);
    cc.inv_std[l] = std::move(inv_std);
    input = &a;
  }

  cc.pooled.resize(channels_, bsz);
  for (Index b = 0; b < bsz; ++b)
    cc.pooled.col(b) = input->middleCols(b * L, L).rowwise().mean();

  const auto w1 = view(params_, block("fc1.w"));
  const auto b1 = view(params_, block("fc1.b"));
  const auto w2 = view(params_, block("fc2.w"));
  const auto b2 = view(params_, block("fc2.b"));

  cc.fc1_out.noalias() = w1 * cc.pooled;
  cc.fc1_out.colwise() += b1.col(0);
  cc.fc1_out = cc.fc1_out.cwiseMax(0.0);

  cc.z.noalias() = w2 * cc.fc1_out;
  cc.z.colwise() += b2.col(0);
  return cc.z;
}

void EmbeddingModel::backward(const MatrixXd& dz, ForwardCache& cc) {
  const Index bsz = cc.batch;
  const Index L = n_bins_;
  const Index cols = bsz * L;
  if (dz.rows() != 2 || dz.cols() != bsz)
    throw std::invalid_argument("dz shape does not match the cached batch");

  const auto w1 = view(params_, block("fc1.w"));
  const auto w2 = view(params_, block("fc2.w"));
  auto d_w1 = view(grads_, block("fc1.w"));
  auto d_b1 = view(grads_, block("fc1.b"));
  auto d_w2 = view(grads_, block("fc2.w"));
  auto d_b2 = view(grads_, block("fc2.b"));

  d_w2.noalias() += dz * cc.fc1_out.transpose();
  d_b2.col(0) += dz.rowwise().sum();

  cc.d_fc1.noalias() = w2.transpose() * dz;
  cc.d_fc1 = (cc.fc1_out.array() > 0.0).select(cc.d_fc1, 0.0);

  d_w1.noalias() += cc.d_fc1 * cc.pooled.transpose();
  d_b1.col(0) += cc.d_fc1.rowwise().sum();

  cc.d_pooled.noalias() = w1.transpose() * cc.d_fc1;

  // spread the pooling gradient back over the delay axis
  cc.d_cols.resize(channels_, cols);
  const double inv_l = 1.0 / static_cast<double>(L);
  for (Index b = 0; b < bsz; ++b)
    cc.d_cols.middleCols(b * L, L).colwise() = cc.d_pooled.col(b) * inv_l;

  for (int l = kConvLayers - 1; l >= 0; --l) {
    const Index c_in = l == 0 ? n_antennas_ : channels_;
    const Index k = kKernels[l];
    const Index pad = (k - 1) / 2;
    const std::string tag = std::to_string(l + 1);

    // ReLU
    cc.d_cols = (cc.act[l].array() > 0.0).select(cc.d_cols, 0.0);

    const auto gamma = view(params_, block("bn" + tag + ".gamma"));
    auto d_gamma = view(grads_, block("bn" + tag + ".gamma"));
    auto d_beta = view(grads_, block("bn" + tag + ".beta"));

    // batch-norm backward through the batch statistics
    const double inv_m = 1.0 / static_cast<double>(cols);
    for (Index c = 0; c < channels_; ++c) {
      const auto d_row = cc.d_cols.row(c);
      const auto xh_row = cc.xhat[l].row(c);
      const double sum_d = d_row.sum();
      const double sum_dx = d_row.cwiseProduct(xh_row).sum();
      d_gamma(c, 0) += sum_dx;
      d_beta(c, 0) += sum_d;
      const double g = gamma(c, 0);
      const double is = cc.inv_std[l][c];
      cc.d_cols.row(c).array() =
          (g * is) * (d_row.array() - inv_m * sum_d - xh_row.array() * (inv_m * sum_dx));
    }

    const auto W = view(params_, block("conv" + tag + ".w"));
    auto d_w = view(grads_, block("conv" + tag + ".w"));
    auto d_b = view(grads_, block("conv" + tag + ".b"));
    d_w.noalias() += cc.d_cols * cc.im2col[l].transpose();
    d_b.col(0) += cc.d_cols.rowwise().sum();

    if (l == 0) break;

    cc.d_im2col.noalias() = W.transpose() * cc.d_cols;
    MatrixXd prev = MatrixXd::Zero(c_in, cols);
    for (Index j = 0; j < k; ++j) {
      const Index shift = j - pad;
      const Index lo = std::max<Index>(0, -shift);
      const Index hi = std::min<Index>(L, L - shift);
      if (hi <= lo) continue;
      for (Index b = 0; b < bsz; ++b) {
        prev.block(0, b * L + lo + shift, c_in, hi - lo) +=
            cc.d_im2col.block(j * c_in, b * L + lo, c_in, hi - lo);
      }
    }
    cc.d_cols = std::move(prev);
  }
}

Eigen::Vector2d embed(EmbeddingModel& model, const MatrixXd& csi_grid,
                      RunMode mode) {
  const MatrixXd out = model.forward({&csi_grid}, mode);
  return out.col(0);
}

namespace {
constexpr std::uint32_t kModelVersion = 1;

void put_named_f32(std::ostream& os, const std::string& name,
                   const double* data, std::size_t count) {
  bin::put_string(os, name);
  bin::put<std::uint64_t>(os, count);
  for (std::size_t i = 0; i < count; ++i)
    bin::put<float>(os, static_cast<float>(data[i]));
}

void get_named_f32(std::istream& is, const std::string& expect, double* data,
                   std::size_t count, const std::string& path) {
  const std::string name = bin::get_string(is, "block name in " + path);
  if (name != expect)
    throw io_error("checkpoint block mismatch in " + path + ": expected " +
                   expect + ", found " + name);
  const auto n = bin::get<std::uint64_t>(is, "block size in " + path);
  if (n != count)
    throw io_error("checkpoint block " + name + " has wrong size in " + path);
  for (std::size_t i = 0; i < count; ++i)
    data[i] = static_cast<double>(bin::get<float>(is, "block data in " + path));
}
}  // namespace

void save_model(const std::string& path, const EmbeddingModel& model,
                std::optional<std::uint64_t> config_hash, const AdamState* adam) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open " + path + " for writing");
  bin::put_magic(os, "CCNN");
  bin::put<std::uint32_t>(os, kModelVersion);
  bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(model.antennas()));
  bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(model.bins()));
  bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(model.channels()));

  std::uint32_t n_blocks = static_cast<std::uint32_t>(model.parameter_blocks().size()) +
                           2 * EmbeddingModel::kConvLayers;
  bin::put<std::uint32_t>(os, n_blocks);
  for (const auto& b : model.parameter_blocks())
    put_named_f32(os, b.name, model.parameters().data() + b.offset, b.size());
  for (int l = 0; l < EmbeddingModel::kConvLayers; ++l) {
    const std::string tag = std::to_string(l + 1);
    put_named_f32(os, "bn" + tag + ".run_mean", model.running_mean(l).data(),
                  static_cast<std::size_t>(model.running_mean(l).size()));
    put_named_f32(os, "bn" + tag + ".run_var", model.running_var(l).data(),
                  static_cast<std::size_t>(model.running_var(l).size()));
  }

  bin::put<std::uint8_t>(os, adam ? 1 : 0);
  if (adam) {
    bin::put<std::uint64_t>(os, static_cast<std::uint64_t>(adam->step));
    put_named_f32(os, "adam.m", adam->m.data(), static_cast<std::size_t>(adam->m.size()));
    put_named_f32(os, "adam.v", adam->v.data(), static_cast<std::size_t>(adam->v.size()));
  }
  if (config_hash) {
    bin::put_magic(os, "CCFG");
    bin::put<std::uint64_t>(os, *config_hash);
  }
  if (!os) throw io_error("failed while writing " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open " + path);
  bin::expect_magic(is, "CCNN", path);
  const auto version = bin::get<std::uint32_t>(is, "checkpoint version");
  if (version != kModelVersion)
    throw io_error("unsupported checkpoint version in " + path);
  const auto n_a = bin::get<std::uint32_t>(is, "antennas");
  const auto n_b = bin::get<std::uint32_t>(is, "bins");
  const auto ch = bin::get<std::uint32_t>(is, "channels");

  LoadedModel out;
  out.model = EmbeddingModel::init(static_cast<int>(n_a), static_cast<int>(n_b),
                                   static_cast<int>(ch), 0);
  const auto n_blocks = bin::get<std::uint32_t>(is, "block count");
  const auto expected = out.model.parameter_blocks().size() +
                        2 * EmbeddingModel::kConvLayers;
  if (n_blocks != expected)
    throw io_error("unexpected block count in " + path);
  for (const auto& b : out.model.parameter_blocks())
    get_named_f32(is, b.name, out.model.parameters().data() + b.offset, b.size(),
                  path);
  for (int l = 0; l < EmbeddingModel::kConvLayers; ++l) {
    const std::string tag = std::to_string(l + 1);
    get_named_f32(is, "bn" + tag + ".run_mean", out.model.running_mean(l).data(),
                  static_cast<std::size_t>(out.model.running_mean(l).size()), path);
    get_named_f32(is, "bn" + tag + ".run_var", out.model.running_var(l).data(),
                  static_cast<std::size_t>(out.model.running_var(l).size()), path);
  }

  const auto has_adam = bin::get<std::uint8_t>(is, "optimizer flag");
  if (has_adam == 1) {
    AdamState adam;
    adam.step = static_cast<std::int64_t>(bin::get<std::uint64_t>(is, "adam step"));
    const auto n = out.model.parameter_count();
    adam.m = VectorXd::Zero(static_cast<Index>(n));
    adam.v = VectorXd::Zero(static_cast<Index>(n));
    get_named_f32(is, "adam.m", adam.m.data(), n, path);
    get_named_f32(is, "adam.v", adam.v.data(), n, path);
    out.adam = std::move(adam);
  } else if (has_adam != 0) {
    throw io_error("bad optimizer flag in " + path);
  }

  char magic[4];
  is.read(magic, 4);
  if (is.gcount() == 4 && std::memcmp(magic, "CCFG", 4) == 0)
    out.config_hash = bin::get<std::uint64_t>(is, "config hash");
  return out;
}

}  // namespace velochart
