// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/training.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "velochart/rng.hpp"
#include "velochart/textio.hpp"

namespace velochart {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

// gradient of ||delta|| with the subgradient 0 at the kink
Vec2 norm_grad(const Vec2& delta) {
  const double r = delta.norm();
  if (r == 0.0) return Vec2::Zero();
  return delta / r;
}

}  // namespace

double pair_loss(EmbeddingModel& model, const MatrixXd& csi_n,
                 const MatrixXd& csi_k, double d, double beta, bool with_grad) {
  if (!(beta > 0.0) || beta > 1.0)
    throw std::invalid_argument("pair weight must lie in (0, 1]");
  if (d < 0.0) throw std::invalid_argument("pair distance must be non-negative");

  ForwardCache cache;
  const MatrixXd z = model.forward({&csi_n, &csi_k}, RunMode::train, &cache);
  const Vec2 delta = z.col(0) - z.col(1);
  const double r = delta.norm();
  const double loss = beta * std::abs(d - r);
  if (with_grad) {
    const double sign = (d - r) >= 0.0 ? 1.0 : -1.0;
    const Vec2 du = -beta * sign * norm_grad(delta);
    MatrixXd dz(2, 2);
    dz.col(0) = du;
    dz.col(1) = -du;
    model.backward(dz, cache);
  }
  return loss;
}

double label_loss(EmbeddingModel& model,
                  const std::vector<const MatrixXd*>& batch,
                  const std::vector<Vec2>& labels, bool with_grad) {
  if (batch.size() != labels.size())
    throw std::invalid_argument("label batch size mismatch");
  if (batch.empty()) throw std::invalid_argument("empty label batch");

  ForwardCache cache;
  const MatrixXd z = model.forward(batch, RunMode::train, &cache);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  MatrixXd dz(2, z.cols());
  for (Index i = 0; i < z.cols(); ++i) {
    const Vec2 delta = Vec2(z.col(i)) - labels[static_cast<std::size_t>(i)];
    loss += delta.norm();
    dz.col(i) = inv_b * norm_grad(delta);
  }
  loss *= inv_b;
  if (with_grad) model.backward(dz, cache);
  return loss;
}

ChannelChart compute_chart(EmbeddingModel& model, const SegmentedDataset& data,
                           int batch_size) {
  const std::size_t n = data.total_samples();
  ChannelChart chart(2, static_cast<Index>(n));
  ForwardCache cache;
  std::vector<const MatrixXd*> batch;
  for (std::size_t start = 0; start < n;
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch_size));
    batch.clear();
    for (std::size_t i = start; i < stop; ++i) batch.push_back(&data.csi_at(i));
    chart.middleCols(static_cast<Index>(start), static_cast<Index>(stop - start)) =
        model.forward(batch, RunMode::infer, &cache);
  }
  return chart;
}

double weighted_stress(const ChannelChart& chart, const SparseDistanceMatrix& sdm) {
  double num = 0.0, den = 0.0;
  for (const auto& e : sdm.entries) {
    const Vec2 zn = chart.col(static_cast<Index>(e.n));
    const Vec2 zk = chart.col(static_cast<Index>(e.k));
    num += e.weight * std::abs(e.d - (zn - zk).norm());
    den += e.weight * e.d;
  }
  if (den <= 0.0) return num;
  return num / den;
}

namespace {

void check_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(cfg.learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be positive");
  if (cfg.batch_pairs < 1)
    throw std::invalid_argument("batch size must be at least 1");
}

[[noreturn]] void nan_abort(int epoch, std::size_t batch_id, double lr) {
  std::ostringstream os;
  os << "loss became non-finite at epoch " << epoch << ", batch " << batch_id
     << " (learning rate " << lr << "); reduce the learning rate";
  throw std::runtime_error(os.str());
}

void progress_line(const char* what, int epoch, int total, double loss) {
  std::printf("%s epoch %d/%d mean loss %.6f\n", what, epoch + 1, total, loss);
  std::fflush(stdout);
}

}  // namespace

TrainResult train_chart(EmbeddingModel& model, const SegmentedDataset& data,
                        const SparseDistanceMatrix& sdm, const TrainConfig& cfg,
                        AdamState* resume_state) {
  check_train_config(cfg);
  const std::size_t n_samples = data.total_samples();
  for (const auto& e : sdm.entries) {
    if (e.n >= n_samples || e.k >= n_samples)
      throw std::invalid_argument("sparse matrix entry indexes beyond the dataset");
  }

  TrainResult result;
  if (sdm.entries.empty()) {
    result.warning = "sparse distance matrix has no entries, model left unchanged";
    result.chart = compute_chart(model, data);
    return result;
  }

  AdamState local_state;
  AdamState& adam = resume_state ? *resume_state : local_state;

  Rng rng(derive_seed(cfg.seed, 0x7261696e));
  std::vector<std::size_t> order(sdm.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ForwardCache cache;
  std::vector<const MatrixXd*> batch;
  const std::size_t pair_batch = static_cast<std::size_t>(cfg.batch_pairs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_id = 0;
    for (std::size_t start = 0; start < order.size();
         start += pair_batch, ++batch_id) {
      const std::size_t stop = std::min(order.size(), start + pair_batch);
      const std::size_t p = stop - start;

      batch.clear();
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(&data.csi_at(sdm.entries[order[i]].n));
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(&data.csi_at(sdm.entries[order[i]].k));

      const MatrixXd z = model.forward(batch, RunMode::train, &cache);
      MatrixXd dz = MatrixXd::Zero(2, z.cols());
      const double inv_p = 1.0 / static_cast<double>(p);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        const auto& e = sdm.entries[order[start + i]];
        const Vec2 delta = Vec2(z.col(static_cast<Index>(i))) -
                           Vec2(z.col(static_cast<Index>(p + i)));
        const double r = delta.norm();
        batch_loss += e.weight * std::abs(e.d - r);
        const double sign = (e.d - r) >= 0.0 ? 1.0 : -1.0;
        const Vec2 du = (-e.weight * sign * inv_p) * norm_grad(delta);
        dz.col(static_cast<Index>(i)) = du;
        dz.col(static_cast<Index>(p + i)) = -du;
      }
      batch_loss *= inv_p;
      if (!std::isfinite(batch_loss)) nan_abort(epoch, batch_id, cfg.learning_rate);

      model.zero_gradients();
      model.backward(dz, cache);
      adam_step(model.parameters(), model.gradients(), adam, cfg.learning_rate,
                cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      epoch_loss += batch_loss * static_cast<double>(p);
    }
    epoch_loss /= static_cast<double>(order.size());
    result.loss_history.push_back(epoch_loss);
    if (cfg.verbose &&
        ((epoch + 1) % std::max(1, cfg.epochs / 20) == 0 || epoch == 0))
      progress_line("chart", epoch, cfg.epochs, epoch_loss);
  }

  result.chart = compute_chart(model, data);
  return result;
}

TrainResult train_fingerprint(EmbeddingModel& model, const SegmentedDataset& data,
                              const TrainConfig& cfg, AdamState* resume_state) {
  check_train_config(cfg);
  if (!data.all_have_positions())
    throw std::invalid_argument("fingerprint training needs ground-truth labels");
  const std::size_t n = data.total_samples();
  if (n == 0) throw std::invalid_argument("empty dataset");

  AdamState local_state;
  AdamState& adam = resume_state ? *resume_state : local_state;

  Rng rng(derive_seed(cfg.seed, 0x66707472));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  ForwardCache cache;
  std::vector<const MatrixXd*> batch;
  std::vector<Vec2> labels;
  const std::size_t bsz = static_cast<std::size_t>(cfg.batch_pairs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_id = 0;
    for (std::size_t start = 0; start < n; start += bsz, ++batch_id) {
      const std::size_t stop = std::min(n, start + bsz);
      batch.clear();
      labels.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(&data.csi_at(order[i]));
        labels.push_back(data.position_at(order[i]));
      }
      model.zero_gradients();
      const double batch_loss = label_loss(model, batch, labels, true);
      if (!std::isfinite(batch_loss)) nan_abort(epoch, batch_id, cfg.learning_rate);
      adam_step(model.parameters(), model.gradients(), adam, cfg.learning_rate,
                cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      epoch_loss += batch_loss * static_cast<double>(stop - start);
    }
    epoch_loss /= static_cast<double>(n);
    result.loss_history.push_back(epoch_loss);
    if (cfg.verbose &&
        ((epoch + 1) % std::max(1, cfg.epochs / 20) == 0 || epoch == 0))
      progress_line("fingerprint", epoch, cfg.epochs, epoch_loss);
  }

  result.chart = compute_chart(model, data);
  return result;
}

void save_loss_history(const std::string& path, const std::vector<double>& history) {
  std::ostringstream os;
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    os << i << ',' << text::fmt(history[i]) << '\n';
  text::write_file(path, os.str());
}

}  // namespace velochart
