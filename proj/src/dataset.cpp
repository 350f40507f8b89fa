// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "velochart/binio.hpp"

namespace velochart {

Dataset::SpeedStats Dataset::speed_stats() const {
  SpeedStats st;
  if (positions.size() < 2) return st;
  double sum = 0.0;
  double sum_sq = 0.0;
  const auto n = positions.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = timestamps[i + 1] - timestamps[i];
    const double speed = (positions[i + 1] - positions[i]).norm() / dt;
    sum += speed;
    sum_sq += speed * speed;
  }
  st.mean = sum / static_cast<double>(n);
  st.stddev = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - st.mean * st.mean));
  return st;
}

std::size_t SegmentedDataset::total_samples() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.size();
  return n;
}

std::size_t SegmentedDataset::segment_start(std::size_t segment) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < segment; ++i) n += segments[i].size();
  return n;
}

std::pair<std::size_t, std::size_t> SegmentedDataset::locate(std::size_t global) const {
  std::size_t seg = 0;
  for (const auto& s : segments) {
    if (global < s.size()) return {seg, global};
    global -= s.size();
    ++seg;
  }
  throw std::invalid_argument("dataset index out of range");
}

const Eigen::MatrixXd& SegmentedDataset::csi_at(std::size_t global) const {
  const auto [seg, local] = locate(global);
  return segments[seg].csi[local];
}

const Vec2& SegmentedDataset::position_at(std::size_t global) const {
  const auto [seg, local] = locate(global);
  return segments[seg].positions[local];
}

bool SegmentedDataset::all_have_positions() const {
  for (const auto& s : segments) {
    if (!s.has_positions()) return false;
  }
  return !segments.empty();
}

void save_dataset(const std::string& path, const Dataset& ds,
                  std::optional<std::uint64_t> config_hash) {
  if (ds.csi.size() != ds.timestamps.size())
    throw std::invalid_argument("dataset csi/timestamp length mismatch");
  if (ds.has_positions() && ds.positions.size() != ds.csi.size())
    throw std::invalid_argument("dataset position count mismatch");

  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot write " + path);

  bin::put_magic(os, "CCDS");
  bin::put<std::uint32_t>(os, 1);
  bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.n_antennas));
  bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.n_bins));
  bin::put<std::uint64_t>(os, ds.csi.size());
  bin::put<double>(os, ds.rate_hz);

  std::vector<float> buf(ds.n_antennas * ds.n_bins);
  for (const auto& grid : ds.csi) {
    if (grid.rows() != static_cast<Eigen::Index>(ds.n_antennas) ||
        grid.cols() != static_cast<Eigen::Index>(ds.n_bins))
      throw std::invalid_argument("dataset grid shape mismatch");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < grid.rows(); ++r)
      for (Eigen::Index c = 0; c < grid.cols(); ++c)
        buf[k++] = static_cast<float>(grid(r, c));
    bin::put_block(os, buf);
  }
  bin::put_block(os, ds.timestamps);
  bin::put<std::uint32_t>(os, ds.has_positions() ? 1u : 0u);
  if (ds.has_positions()) {
    for (const auto& p : ds.positions) {
      bin::put<double>(os, p.x());
      bin::put<double>(os, p.y());
    }
  }
  if (config_hash) {
    bin::put_magic(os, "CCFG");
    bin::put<std::uint64_t>(os, *config_hash);
  }
  if (!os) throw io_error("write failed: " + path);
}

LoadedDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open " + path);

  bin::expect_magic(is, "CCDS", path);
  const auto version = bin::get<std::uint32_t>(is, path + " version");
  if (version != 1) throw io_error("unsupported container version in " + path);

  LoadedDataset out;
  Dataset& ds = out.data;
  ds.n_antennas = bin::get<std::uint32_t>(is, path + " N_A");
  ds.n_bins = bin::get<std::uint32_t>(is, path + " L_w");
  const auto count = bin::get<std::uint64_t>(is, path + " count");
  ds.rate_hz = bin::get<double>(is, path + " rate");

  ds.csi.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto buf =
        bin::get_block<float>(is, ds.n_antennas * ds.n_bins, path + " grids");
    Eigen::MatrixXd grid(ds.n_antennas, ds.n_bins);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < grid.rows(); ++r)
      for (Eigen::Index c = 0; c < grid.cols(); ++c) grid(r, c) = buf[k++];
    ds.csi.push_back(std::move(grid));
  }
  ds.timestamps = bin::get_block<double>(is, count, path + " timestamps");
  const auto flag = bin::get<std::uint32_t>(is, path + " position flag");
  if (flag == 1) {
    ds.positions.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const double x = bin::get<double>(is, path + " positions");
      const double y = bin::get<double>(is, path + " positions");
      ds.positions.emplace_back(x, y);
    }
  } else if (flag != 0) {
    throw io_error("bad position flag in " + path);
  }

  char tag[4];
  is.read(tag, 4);
  if (is.gcount() == 4 && std::string(tag, 4) == "CCFG") {
    out.config_hash = bin::get<std::uint64_t>(is, path + " config hash");
  }
  return out;
}

}  // namespace velochart
