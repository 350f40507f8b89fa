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

#include "velochart/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "velochart/common.hpp"
#include "velochart/rng.hpp"
#include "velochart/sinkhorn.hpp"
#include "velochart/svg.hpp"
#include "velochart/textio.hpp"
#include "velochart/transform.hpp"

namespace velochart {

namespace {

using Eigen::Index;
using Eigen::Matrix2Xd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

VectorXd sorted_errors(const Matrix2Xd& predicted, const Matrix2Xd& truth) {
  if (predicted.cols() != truth.cols())
    throw std::invalid_argument("predicted and truth point counts differ");
  if (predicted.cols() < 1) throw std::invalid_argument("no points to score");
  VectorXd errs = (predicted - truth).colwise().norm();
  std::sort(errs.data(), errs.data() + errs.size());
  return errs;
}

// nearest-rank percentile over pre-sorted values
double rank_percentile(const VectorXd& sorted, double pct) {
  const auto n = static_cast<double>(sorted.size());
  const auto idx =
      static_cast<Index>(std::ceil(pct / 100.0 * n)) - 1;
  return sorted[std::max<Index>(idx, 0)];
}

Matrix2Xd positions_matrix(const SegmentedDataset& data) {
  const std::size_t n = data.total_samples();
  Matrix2Xd out(2, static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    out.col(static_cast<Index>(i)) = data.position_at(i);
  return out;
}

Trajectory segment_trajectory(const Dataset& seg) {
  Trajectory t;
  t.sample_rate_hz = seg.rate_hz;
  t.timestamps = seg.timestamps;
  t.positions = seg.positions;
  return t;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string experiment_snapshot(const ExperimentConfig& cfg) {
  std::string s;
  const auto add = [&](const std::string& key, const std::string& val) {
    s += key + " = " + val + "\n";
  };
  add("env.width_m", text::fmt(cfg.env.width_m));
  add("env.height_m", text::fmt(cfg.env.height_m));
  add("env.bs_count", text::fmt(std::uint64_t(cfg.env.bs_count)));
  add("env.scatterer_count", text::fmt(std::uint64_t(cfg.env.scatterer_count)));
  for (std::size_t i = 0; i < cfg.env.obstacles.size(); ++i) {
    const Obstacle& o = cfg.env.obstacles[i];
    add("env.obstacle." + std::to_string(i),
        text::fmt(o.rect.lo.x()) + " " + text::fmt(o.rect.lo.y()) + " " +
            text::fmt(o.rect.hi.x()) + " " + text::fmt(o.rect.hi.y()) + " " +
            fmt_bool(o.blocking) + " " + fmt_bool(o.inaccessible));
  }
  add("env.bandwidth_hz", text::fmt(cfg.env.bandwidth_hz));
  add("env.sample_count", text::fmt(std::uint64_t(cfg.env.sample_count)));
  add("env.noise_floor_db", text::fmt(cfg.env.noise_floor_db));
  add("env.nlos_attenuation", text::fmt(cfg.env.nlos_attenuation));
  add("env.scatter_gain", text::fmt(cfg.env.scatter_gain));
  add("env.min_path_m", text::fmt(cfg.env.min_path_m));
  add("motion.mean_speed_mps", text::fmt(cfg.motion.mean_speed_mps));
  add("motion.speed_std", text::fmt(cfg.motion.speed_std));
  add("motion.turn_rate_std", text::fmt(cfg.motion.turn_rate_std));
  add("motion.duration_s", text::fmt(cfg.motion.duration_s));
  add("sample_rate_hz", text::fmt(cfg.sample_rate_hz));
  add("train_segments", text::fmt(std::uint64_t(cfg.train_segments)));
  add("test_duration_s", text::fmt(cfg.test_duration_s));
  add("window_s", text::fmt(cfg.window_s));
  add("stride", text::fmt(std::uint64_t(cfg.stride)));
  add("noise_level", text::fmt(std::uint64_t(cfg.noise_level)));
  add("padding", cfg.padding == PaddingMode::tdoa_padded ? "tdoa_padded"
                                                         : "pre_synchronized");
  add("model_channels", text::fmt(std::uint64_t(cfg.model_channels)));
  add("train.epochs", text::fmt(std::uint64_t(cfg.train.epochs)));
  add("train.batch_pairs", text::fmt(std::uint64_t(cfg.train.batch_pairs)));
  add("train.learning_rate", text::fmt(cfg.train.learning_rate));
  add("match.i_iter", text::fmt(std::uint64_t(cfg.match.i_iter)));
  add("match.i_wt", text::fmt(std::uint64_t(cfg.match.i_wt)));
  add("match.i_wl", text::fmt(std::uint64_t(cfg.match.i_wl)));
  add("match.lambda", text::fmt(cfg.match.lambda));
  add("match.batch_size", text::fmt(std::uint64_t(cfg.match.batch_size)));
  add("match.restart_rotations",
      text::fmt(std::uint64_t(cfg.match.restart_rotations)));
  add("match.try_flips", fmt_bool(cfg.match.try_flips));
  add("match.lr_transform", text::fmt(cfg.match.lr_transform));
  add("match.lr_logits", text::fmt(cfg.match.lr_logits));
  add("match.sinkhorn_iters", text::fmt(std::uint64_t(cfg.match.sinkhorn_iters)));
  add("match.eval_cap", text::fmt(std::uint64_t(cfg.match.eval_cap)));
  add("match.refit_epochs", text::fmt(std::uint64_t(cfg.match.refit_epochs)));
  add("map_cell_m", text::fmt(cfg.map_cell_m));
  add("map_samples", text::fmt(std::uint64_t(cfg.map_samples)));
  add("map_ignore_obstacles", fmt_bool(cfg.map_ignore_obstacles));
  add("seed", text::fmt(cfg.seed));
  return s;
}

namespace {

ExperimentReport empty_report(const ExperimentConfig& cfg, std::string suite) {
  ExperimentReport rep;
  rep.suite = std::move(suite);
  rep.seed = cfg.seed;
  rep.config_snapshot = experiment_snapshot(cfg);
  rep.config_hash =
      fnv1a64(rep.config_snapshot.data(), rep.config_snapshot.size());
  return rep;
}

struct ChartedModel {
  EmbeddingModel model;
  ChannelChart chart_train;
  ChannelChart chart_test;
  TrainResult result;
};

ChartedModel train_charting(const ExperimentConfig& cfg, const Scenario& sc,
                            const SparseDistanceMatrix& sdm,
                            std::uint64_t cell_seed) {
  ChartedModel out{EmbeddingModel::init(
                       static_cast<int>(sc.train_data.segments.at(0).n_antennas),
                       static_cast<int>(sc.train_data.segments.at(0).n_bins),
                       cfg.model_channels, derive_seed(cell_seed, 1)),
                   {}, {}, {}};
  TrainConfig tc = cfg.train;
  tc.mode = TrainConfig::Mode::charting;
  tc.seed = derive_seed(cell_seed, 2);
  out.result = train_chart(out.model, sc.train_data, sdm, tc);
  out.chart_train = out.result.chart;
  out.chart_test = compute_chart(out.model, sc.test_data);
  return out;
}

// joint objective: distance loss on velocity pairs plus the transport loss of
// the same batch embeddings against the fixed map distribution
TrainResult train_combined(EmbeddingModel& model, const SegmentedDataset& data,
                           const SparseDistanceMatrix& sdm,
                           const MapDistribution& map,
                           const MatchSchedule& sched, const TrainConfig& cfg) {
  if (cfg.epochs < 1 || !(cfg.learning_rate > 0.0) || cfg.batch_pairs < 1)
    throw std::invalid_argument("bad combined-training config");
  if (sdm.entries.empty())
    throw std::invalid_argument("combined training needs sparse distances");
  const std::size_t total = data.total_samples();
  for (const SdmEntry& e : sdm.entries)
    if (e.n >= total || e.k >= total)
      throw std::invalid_argument(
          "sparse matrix entry indexes beyond the dataset");

  TrainResult out;
  AdamState adam;
  Rng rng(derive_seed(cfg.seed, 0x636f6d62));
  std::vector<std::size_t> order(sdm.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  MapDistribution fixed = map;  // q stays what the caller sampled
  LinearTransform identity;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    const auto P = static_cast<std::size_t>(cfg.batch_pairs);
    for (std::size_t start = 0; start < order.size(); start += P) {
      const std::size_t stop = std::min(order.size(), start + P);
      const auto p = static_cast<Index>(stop - start);

      std::vector<const MatrixXd*> batch(static_cast<std::size_t>(2 * p));
      for (std::size_t i = start; i < stop; ++i) {
        const SdmEntry& e = sdm.entries[order[i]];
        batch[i - start] = &data.csi_at(e.n);
        batch[i - start + static_cast<std::size_t>(p)] = &data.csi_at(e.k);
      }

      ForwardCache cache;
      const Matrix2Xd z = model.forward(batch, RunMode::train, &cache);
      Matrix2Xd dz = Matrix2Xd::Zero(2, 2 * p);
      double batch_pair = 0.0;
      const double inv_p = 1.0 / static_cast<double>(p);
      for (Index i = 0; i < p; ++i) {
        const SdmEntry& e = sdm.entries[order[start + static_cast<std::size_t>(i)]];
        const Vec2 delta = z.col(i) - z.col(i + p);
        const double r = delta.norm();
        const double sign = e.d - r > 0.0 ? 1.0 : (e.d - r < 0.0 ? -1.0 : 0.0);
        batch_pair += e.weight * std::abs(e.d - r);
        if (r > 0.0) {
          const Vec2 du = -(e.weight * inv_p) * sign * (delta / r);
          dz.col(i) = du;
          dz.col(i + p) = -du;
        }
      }
      batch_pair *= inv_p;

      const SinkhornLoss lm = sinkhorn_loss(z, fixed, identity, sched.lambda,
                                            sched.sinkhorn_iters, true);
      dz += lm.d_points;

      const double batch_loss = batch_pair + lm.value;
      if (!std::isfinite(batch_loss))
        throw std::runtime_error(
            "loss became non-finite at epoch " + std::to_string(epoch) +
            " (learning rate " + text::fmt(cfg.learning_rate) +
            "); reduce the learning rate");
      epoch_loss += batch_loss * static_cast<double>(p);
      seen += static_cast<std::size_t>(p);

      model.zero_gradients();
      model.backward(dz, cache);
      adam_step(model.parameters(), model.gradients(), adam, cfg.learning_rate,
                cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    }
    out.loss_history.push_back(seen > 0 ? epoch_loss / static_cast<double>(seen)
                                        : 0.0);
  }
  out.chart = compute_chart(model, data);
  return out;
}

ReportEntry failed_entry(ReportEntry e, const std::exception& ex) {
  e.error = ex.what();
  return e;
}

}  // namespace

double ce90(const Matrix2Xd& predicted, const Matrix2Xd& truth) {
  return rank_percentile(sorted_errors(predicted, truth), 90.0);
}

VectorXd error_deciles(const Matrix2Xd& predicted, const Matrix2Xd& truth) {
  const VectorXd errs = sorted_errors(predicted, truth);
  VectorXd out(10);
  for (int i = 0; i < 10; ++i)
    out[i] = rank_percentile(errs, 10.0 * (i + 1));
  return out;
}

Dataset synthesize_dataset(const Environment& env, const Trajectory& traj,
                           PaddingMode padding) {
  Dataset ds;
  ds.n_antennas = env.base_stations.size();
  ds.n_bins = static_cast<std::size_t>(env.sample_count);
  ds.rate_hz = traj.sample_rate_hz;
  ds.timestamps = traj.timestamps;
  ds.positions = traj.positions;
  ds.csi.reserve(traj.positions.size());
  for (const Vec2& p : traj.positions)
    ds.csi.push_back(tdoa_pad(synthesize_csi(env, p), padding).grid);
  return ds;
}

Scenario build_scenario(const ExperimentConfig& cfg) {
  if (cfg.train_segments < 1)
    throw std::invalid_argument("need at least one train segment");
  if (!(cfg.test_duration_s > 0.0))
    throw std::invalid_argument("test duration must be positive");

  Scenario sc;
  sc.env = generate_environment(cfg.env, derive_seed(cfg.seed, 0x656e7600));
  for (int i = 0; i < cfg.train_segments; ++i) {
    const Trajectory traj =
        generate_trajectory(sc.env, cfg.motion, cfg.sample_rate_hz,
                            derive_seed(cfg.seed, 0x74726a00 + std::uint64_t(i)));
    sc.train_data.segments.push_back(
        synthesize_dataset(sc.env, traj, cfg.padding));
  }
  MotionSpec test_motion = cfg.motion;
  test_motion.duration_s = cfg.test_duration_s;
  const Trajectory test_traj = generate_trajectory(
      sc.env, test_motion, cfg.sample_rate_hz, derive_seed(cfg.seed, 0x74657374));
  sc.test_data.segments.push_back(
      synthesize_dataset(sc.env, test_traj, cfg.padding));

  sc.grid =
      rasterize_environment(sc.env, cfg.map_cell_m, cfg.map_ignore_obstacles);
  sc.map = map_from_grid(sc.grid, cfg.map_samples,
                         derive_seed(cfg.seed, 0x6d617000));
  return sc;
}

SparseDistanceMatrix build_noisy_sdm(const SegmentedDataset& data,
                                     double window_s, std::size_t stride,
                                     int noise_level) {
  if (!(window_s > 0.0))
    throw std::invalid_argument("window length must be positive");
  if (stride == 0) throw std::invalid_argument("anchor stride must be at least 1");
  if (!data.all_have_positions())
    throw std::invalid_argument(
        "sparse distances need ground-truth positions to difference");

  const NoiseProfile profile = noise_preset(noise_level);
  SparseDistanceMatrix sdm;
  sdm.window_s = window_s;
  sdm.stride = stride;
  for (std::size_t s = 0; s < data.segments.size(); ++s) {
    const VelocitySeries v =
        apply_noise(derive_velocity(segment_trajectory(data.segments[s])),
                    profile);
    append_sdm_segment(sdm, v, static_cast<std::uint32_t>(s),
                       data.segment_start(s));
  }
  if (sdm.entries.empty())
    sdm.warning = "window shorter than the sample period, no pair survives";
  return sdm;
}

ExperimentReport run_matrix(const ExperimentConfig& cfg,
                            const std::vector<int>& noise_levels,
                            const std::vector<double>& window_sizes,
                            int threads) {
  if (noise_levels.empty() || window_sizes.empty())
    throw std::invalid_argument("matrix needs at least one noise level and window");
  const double t0 = now_s();
  ExperimentReport rep = empty_report(cfg, "window_noise");
  const Scenario sc = build_scenario(cfg);
  const Matrix2Xd truth_train = positions_matrix(sc.train_data);
  const Matrix2Xd truth_test = positions_matrix(sc.test_data);

  const std::size_t cells = noise_levels.size() * window_sizes.size();
  rep.entries.resize(cells);

  const auto run_cell = [&](std::size_t idx) {
    const int level = noise_levels[idx / window_sizes.size()];
    const double window = window_sizes[idx % window_sizes.size()];
    ReportEntry e;
    e.method = "charting";
    e.window_s = window;
    e.noise_level = level;
    const double c0 = now_s();
    try {
      const std::uint64_t cell_seed = derive_seed(cfg.seed, 0xce110000 + idx);
      const SparseDistanceMatrix sdm =
          build_noisy_sdm(sc.train_data, window, cfg.stride, level);
      ChartedModel cm = train_charting(cfg, sc, sdm, cell_seed);
      const LinearTransform tf =
          least_squares_align(cm.chart_train, truth_train);
      const Matrix2Xd predicted = apply_transform(tf, cm.chart_test);
      e.ce90_m = ce90(predicted, truth_test);
      e.deciles = error_deciles(predicted, truth_test);
    } catch (const std::exception& ex) {
      e = failed_entry(e, ex);
    }
    e.runtime_s = now_s() - c0;
    rep.entries[idx] = std::move(e);
  };

  const auto workers = static_cast<std::size_t>(
      std::clamp<int>(threads, 1, static_cast<int>(cells)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells; ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells; i = next++) run_cell(i);
      });
    for (auto& th : pool) th.join();
  }
  rep.total_runtime_s = now_s() - t0;
  return rep;
}

ExperimentReport run_map_matching_suite(const ExperimentConfig& cfg,
                                        const std::vector<std::string>& methods) {
  if (methods.empty()) throw std::invalid_argument("no methods selected");
  for (const std::string& m : methods)
    if (m != "ours" && m != "static_map" && m != "combined" &&
        m != "least_sq" && m != "fingerprint")
      throw std::invalid_argument("unknown method: " + m);

  const double t0 = now_s();
  ExperimentReport rep = empty_report(cfg, "map_matching");
  const Scenario sc = build_scenario(cfg);
  const Matrix2Xd truth_train = positions_matrix(sc.train_data);
  const Matrix2Xd truth_test = positions_matrix(sc.test_data);
  const SparseDistanceMatrix sdm =
      build_noisy_sdm(sc.train_data, cfg.window_s, cfg.stride, cfg.noise_level);

  // the chart is shared by every matching variant so the comparison isolates
  // the alignment step
  const bool needs_chart =
      std::any_of(methods.begin(), methods.end(), [](const std::string& m) {
        return m == "ours" || m == "static_map" || m == "least_sq";
      });
  ChartedModel shared;
  if (needs_chart)
    shared = train_charting(cfg, sc, sdm, derive_seed(cfg.seed, 0xc4a27000));

  for (const std::string& m : methods) {
    ReportEntry e;
    e.method = m;
    e.window_s = cfg.window_s;
    e.noise_level = cfg.noise_level;
    const double c0 = now_s();
    try {
      Matrix2Xd predicted;
      if (m == "ours" || m == "static_map") {
        MatchSchedule sched = cfg.match;
        if (m == "static_map") sched.i_wl = sched.i_iter + 1;
        const MatchResult res =
            match_map(shared.chart_train, sc.map, sched,
                      derive_seed(cfg.seed, m == "ours" ? 0x6f757273 : 0x57a71c));
        predicted = apply_transform(res.transform, shared.chart_test);
      } else if (m == "least_sq") {
        const LinearTransform tf =
            least_squares_align(shared.chart_train, truth_train);
        predicted = apply_transform(tf, shared.chart_test);
      } else if (m == "combined") {
        EmbeddingModel model = EmbeddingModel::init(
            static_cast<int>(sc.train_data.segments.at(0).n_antennas),
            static_cast<int>(sc.train_data.segments.at(0).n_bins),
            cfg.model_channels, derive_seed(cfg.seed, 0xc0b17001));
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, 0xc0b17002);
        train_combined(model, sc.train_data, sdm, sc.map, cfg.match, tc);
        predicted = compute_chart(model, sc.test_data);
      } else {  // fingerprint
        EmbeddingModel model = EmbeddingModel::init(
            static_cast<int>(sc.train_data.segments.at(0).n_antennas),
            static_cast<int>(sc.train_data.segments.at(0).n_bins),
            cfg.model_channels, derive_seed(cfg.seed, 0xf1997001));
        TrainConfig tc = cfg.train;
        tc.mode = TrainConfig::Mode::fingerprint;
        tc.seed = derive_seed(cfg.seed, 0xf1997002);
        train_fingerprint(model, sc.train_data, tc);
        predicted = compute_chart(model, sc.test_data);
      }
      e.ce90_m = ce90(predicted, truth_test);
      e.deciles = error_deciles(predicted, truth_test);
    } catch (const std::exception& ex) {
      e = failed_entry(e, ex);
    }
    e.runtime_s = now_s() - c0;
    rep.entries.push_back(std::move(e));
  }
  rep.total_runtime_s = now_s() - t0;
  return rep;
}

MatrixXd bs_correlation(const std::vector<MatrixXd>& samples,
                        std::string* warning) {
  if (samples.empty()) throw std::invalid_argument("no samples to correlate");
  const Index rows = samples.front().rows();
  std::size_t flat = 0;
  MatrixXd acc = MatrixXd::Zero(rows, rows);
  for (const MatrixXd& g : samples) {
    if (g.rows() != rows)
      throw std::invalid_argument("station counts differ between samples");
    MatrixXd centered = g;
    VectorXd norms(rows);
    for (Index i = 0; i < rows; ++i) {
      centered.row(i).array() -= g.row(i).mean();
      norms[i] = centered.row(i).norm();
    }
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < rows; ++j) {
        if (i == j) {
          acc(i, j) += 1.0;
        } else if (norms[i] > 0.0 && norms[j] > 0.0) {
          acc(i, j) += centered.row(i).dot(centered.row(j)) /
                       (norms[i] * norms[j]);
        } else {
          ++flat;  // zero-variance row, counts as no correlation
        }
      }
  }
  if (flat > 0 && warning != nullptr)
    *warning = std::to_string(flat) +
               " zero-variance station rows contributed correlation 0";
  return acc / static_cast<double>(samples.size());
}

ExperimentReport run_bs_ablation(const ExperimentConfig& cfg,
                                 const std::vector<int>& bs_counts) {
  if (bs_counts.empty()) throw std::invalid_argument("no station counts given");
  const double t0 = now_s();
  ExperimentReport rep = empty_report(cfg, "bs_ablation");
  const Scenario sc = build_scenario(cfg);
  const int full = static_cast<int>(sc.env.base_stations.size());
  for (const int c : bs_counts) {
    if (c < 2)
      throw std::invalid_argument(
          "delay alignment needs at least two base stations");
    if (c > full)
      throw std::invalid_argument("station count exceeds the environment");
  }
  const Matrix2Xd truth_train = positions_matrix(sc.train_data);
  const Matrix2Xd truth_test = positions_matrix(sc.test_data);

  for (std::size_t ci = 0; ci < bs_counts.size(); ++ci) {
    const int count = bs_counts[ci];
    Environment env_c = sc.env;
    env_c.base_stations.resize(static_cast<std::size_t>(count));

    Scenario sub;
    sub.env = env_c;
    for (const Dataset& seg : sc.train_data.segments)
      sub.train_data.segments.push_back(
          synthesize_dataset(env_c, segment_trajectory(seg), cfg.padding));
    for (const Dataset& seg : sc.test_data.segments)
      sub.test_data.segments.push_back(
          synthesize_dataset(env_c, segment_trajectory(seg), cfg.padding));
    const SparseDistanceMatrix sdm = build_noisy_sdm(
        sub.train_data, cfg.window_s, cfg.stride, cfg.noise_level);
    const std::uint64_t cell_seed = derive_seed(cfg.seed, 0xb5000000 + ci);

    ReportEntry chart_e;
    chart_e.method = "charting";
    chart_e.bs_count = count;
    chart_e.window_s = cfg.window_s;
    chart_e.noise_level = cfg.noise_level;
    double c0 = now_s();
    try {
      ChartedModel cm = train_charting(cfg, sub, sdm, cell_seed);
      const LinearTransform tf =
          least_squares_align(cm.chart_train, truth_train);
      const Matrix2Xd predicted = apply_transform(tf, cm.chart_test);
      chart_e.ce90_m = ce90(predicted, truth_test);
      chart_e.deciles = error_deciles(predicted, truth_test);
    } catch (const std::exception& ex) {
      chart_e = failed_entry(chart_e, ex);
    }
    chart_e.runtime_s = now_s() - c0;
    rep.entries.push_back(std::move(chart_e));

    ReportEntry fp_e;
    fp_e.method = "fingerprint";
    fp_e.bs_count = count;
    fp_e.window_s = cfg.window_s;
    fp_e.noise_level = cfg.noise_level;
    c0 = now_s();
    try {
      EmbeddingModel model = EmbeddingModel::init(
          count, static_cast<int>(sub.train_data.segments.at(0).n_bins),
          cfg.model_channels, derive_seed(cell_seed, 3));
      TrainConfig tc = cfg.train;
      tc.mode = TrainConfig::Mode::fingerprint;
      tc.seed = derive_seed(cell_seed, 4);
      train_fingerprint(model, sub.train_data, tc);
      const Matrix2Xd predicted = compute_chart(model, sub.test_data);
      fp_e.ce90_m = ce90(predicted, truth_test);
      fp_e.deciles = error_deciles(predicted, truth_test);
    } catch (const std::exception& ex) {
      fp_e = failed_entry(fp_e, ex);
    }
    fp_e.runtime_s = now_s() - c0;
    rep.entries.push_back(std::move(fp_e));
  }
  rep.total_runtime_s = now_s() - t0;
  return rep;
}

void save_report_json(const std::string& path, const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["suite"] = report.suite;
  j["seed"] = report.seed;
  j["config_hash"] = text::fmt_hex(report.config_hash);
  j["config"] = report.config_snapshot;
  // wall-clock runtimes stay on stdout: report files must rewrite
  // byte-identical under a fixed seed, so nothing volatile lands here
  // context from a measured-system study, for orientation only, never asserted
  if (report.suite == "map_matching")
    j["reference_ce90_m"] = {{"fingerprint", 0.90},
                             {"least_sq", 0.92},
                             {"ours", 1.16},
                             {"static_map", 1.71},
                             {"combined", 3.43}};
  else if (report.suite == "window_noise")
    j["reference_ce90_m"] = {{"window15_level3", 0.892},
                             {"window5_level3", 6.396}};
  else if (report.suite == "bs_ablation")
    j["reference_ce90_m"] = {{"charting_8bs", 0.82}, {"fingerprint_8bs", 0.90}};
  j["entries"] = nlohmann::ordered_json::array();
  for (const ReportEntry& e : report.entries) {
    nlohmann::ordered_json je;
    je["method"] = e.method;
    je["window_s"] = e.window_s;
    je["noise_level"] = e.noise_level;
    je["bs_count"] = e.bs_count;
    if (e.error.empty()) {
      je["ce90_m"] = e.ce90_m;
      auto deciles = nlohmann::ordered_json::array();
      for (Index i = 0; i < e.deciles.size(); ++i) deciles.push_back(e.deciles[i]);
      je["deciles_m"] = deciles;
    } else {
      je["error"] = e.error;
    }
    j["entries"].push_back(je);
  }
  text::write_file(path, j.dump(2) + "\n");
}

void save_report_csv(const std::string& path, const ExperimentReport& report) {
  std::string s =
      "suite,method,window_s,noise_level,bs_count,ce90_m,p50_m,p100_m,error\n";
  for (const ReportEntry& e : report.entries) {
    std::string err = e.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    s += report.suite + "," + e.method + "," + text::fmt(e.window_s) + "," +
         std::to_string(e.noise_level) + "," + std::to_string(e.bs_count) + ",";
    if (e.error.empty()) {
      s += text::fmt(e.ce90_m) + "," + text::fmt(e.deciles[4]) + "," +
           text::fmt(e.deciles[9]) + ",";
    } else {
      s += ",,,";
    }
    s += err + "\n";
  }
  text::write_file(path, s);
}

std::string render_chart_svg(const ChannelChart& chart, const Matrix2Xd& truth) {
  if (chart.cols() != truth.cols() || chart.cols() < 1)
    throw std::invalid_argument("chart and truth sizes differ");
  const Vec2 lo = chart.rowwise().minCoeff();
  const Vec2 hi = chart.rowwise().maxCoeff();
  const Vec2 pad = 0.05 * (hi - lo) + Vec2(1e-6, 1e-6);
  SvgCanvas canvas(Rect{lo - pad, hi + pad}, 40.0);
  const Vec2 tlo = truth.rowwise().minCoeff();
  const Vec2 span = (truth.rowwise().maxCoeff() - tlo).cwiseMax(1e-9);
  for (Index i = 0; i < chart.cols(); ++i) {
    const double u = (truth(0, i) - tlo.x()) / span.x();
    const double v = (truth(1, i) - tlo.y()) / span.y();
    canvas.circle(chart.col(i), 2.5, svg_rgb(u, 0.2 + 0.6 * v, 1.0 - u), 0.8);
  }
  return canvas.str();
}

std::string render_map_svg(const MapDistribution& map, const OccupancyGrid& grid) {
  const Vec2 lo = grid.origin;
  const Vec2 hi = grid.origin + Vec2(grid.cols() * grid.cell_size_m,
                                     grid.rows() * grid.cell_size_m);
  SvgCanvas canvas(Rect{lo, hi}, 40.0);
  for (Index r = 0; r < grid.rows(); ++r)
    for (Index c = 0; c < grid.cols(); ++c)
      if (!grid.free_at(r, c)) {
        const Vec2 center = grid.cell_center(r, c);
        const Vec2 half(grid.cell_size_m / 2.0, grid.cell_size_m / 2.0);
        canvas.rect(Rect{center - half, center + half}, "#555555", 1.0);
      }
  const VectorXd q = map.probabilities();
  const double qmax = q.maxCoeff();
  for (Index i = 0; i < map.points.cols(); ++i) {
    const double rel = qmax > 0.0 ? q[i] / qmax : 0.0;
    canvas.circle(map.points.col(i), 2.0 + 4.0 * rel,
                  svg_rgb(0.85, 0.25 + 0.5 * (1.0 - rel), 0.16),
                  0.25 + 0.75 * rel);
  }
  return canvas.str();
}

std::string render_overlay_svg(const Environment& env,
                               const Matrix2Xd& predicted,
                               const Matrix2Xd& truth) {
  if (predicted.cols() != truth.cols())
    throw std::invalid_argument("predicted and truth point counts differ");
  SvgCanvas canvas(env.bounds, 40.0);
  for (const Obstacle& o : env.obstacles)
    canvas.rect(o.rect, o.inaccessible ? "#bbbbbb" : "#dddddd", 0.8, "#888888");
  for (Index i = 0; i < truth.cols(); ++i)
    canvas.line(truth.col(i), predicted.col(i), "#cccccc", 0.6);
  for (Index i = 0; i < truth.cols(); ++i)
    canvas.circle(truth.col(i), 2.0, "#1f77b4", 0.7);
  for (Index i = 0; i < predicted.cols(); ++i)
    canvas.circle(predicted.col(i), 2.0, "#d62728", 0.7);
  for (const Vec2& bs : env.base_stations) {
    const Vec2 half(0.15, 0.15);
    canvas.rect(Rect{bs - half, bs + half}, "#000000", 1.0);
  }
  return canvas.str();
}

}  // namespace velochart
