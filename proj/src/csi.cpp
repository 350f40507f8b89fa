// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/csi.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace velochart {

namespace {

// Adds one propagation path as a triangular pulse; the two straddling bins
// split the path power by the fractional delay, so total deposited power is
// preserved for any in-window delay.
void deposit(Eigen::MatrixXd& grid, Eigen::Index r, double bin_pos, double power) {
  const auto b0 = static_cast<Eigen::Index>(std::floor(bin_pos));
  const double frac = bin_pos - static_cast<double>(b0);
  if (b0 >= 0 && b0 < grid.cols()) grid(r, b0) += power * (1.0 - frac);
  if (b0 + 1 >= 0 && b0 + 1 < grid.cols()) grid(r, b0 + 1) += power * frac;
}

}  // namespace

CsiTensor synthesize_csi(const Environment& env, const Vec2& position) {
  if (!env.bounds.contains(position))
    throw std::invalid_argument("synthesize_csi: position outside bounds");

  const auto n_a = static_cast<Eigen::Index>(env.base_stations.size());
  const auto l_w = static_cast<Eigen::Index>(env.sample_count);
  const double bin_width = env.bin_width_s();

  CsiTensor csi;
  csi.grid = Eigen::MatrixXd::Zero(n_a, l_w);
  csi.arrival_offsets.resize(static_cast<std::size_t>(n_a));

  for (Eigen::Index r = 0; r < n_a; ++r) {
    const Vec2& bs = env.base_stations[static_cast<std::size_t>(r)];

    const double d_direct = (position - bs).norm();
    double p_direct = 1.0 / std::pow(std::max(d_direct, env.min_path_m), 2);
    if (env.path_blocked(position, bs)) p_direct *= env.nlos_attenuation;
    const double direct_bin = d_direct / kSpeedOfLight / bin_width;
    deposit(csi.grid, r, direct_bin, p_direct);
    csi.arrival_offsets[static_cast<std::size_t>(r)] =
        static_cast<int>(std::floor(direct_bin));

    for (const Vec2& sc : env.scatterers) {
      const double len = (position - sc).norm() + (sc - bs).norm();
      double p = env.scatter_gain / std::pow(std::max(len, env.min_path_m), 2);
      if (env.path_blocked(position, sc)) p *= env.nlos_attenuation;
      if (env.path_blocked(sc, bs)) p *= env.nlos_attenuation;
      deposit(csi.grid, r, len / kSpeedOfLight / bin_width, p);
    }
  }

  csi.grid.array() += env.noise_floor_linear();
  return csi;
}

CsiTensor tdoa_pad(const CsiTensor& csi, PaddingMode mode) {
  if (mode == PaddingMode::pre_synchronized) return csi;

  const auto rows = csi.grid.rows();
  if (csi.arrival_offsets.size() != static_cast<std::size_t>(rows))
    throw std::invalid_argument("tdoa_pad: arrival offsets absent");

  int min_offset = csi.arrival_offsets[0];
  for (const int o : csi.arrival_offsets) min_offset = std::min(min_offset, o);

  CsiTensor out;
  out.grid = Eigen::MatrixXd::Zero(rows, csi.grid.cols());
  // offsets are consumed by the shift; a second application is the identity
  out.arrival_offsets.assign(static_cast<std::size_t>(rows), 0);

  for (Eigen::Index r = 0; r < rows; ++r) {
    const int shift = csi.arrival_offsets[static_cast<std::size_t>(r)] - min_offset;
    if (shift >= csi.grid.cols())
      throw std::invalid_argument("tdoa_pad: shift of row " + std::to_string(r) +
                                  " exceeds the delay window");
    const auto keep = csi.grid.cols() - shift;
    out.grid.row(r).segment(shift, keep) = csi.grid.row(r).head(keep);
  }
  return out;
}

}  // namespace velochart
