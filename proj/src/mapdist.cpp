// velochart: velocity-based channel charting with adaptive map matching
// SPDX-License-Identifier: Apache-2.0

#include "velochart/mapdist.hpp"

#include <zlib.h>

#include <cctype>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "json.hpp"
#include "velochart/common.hpp"
#include "velochart/rng.hpp"
#include "velochart/textio.hpp"

namespace velochart {

Eigen::Index OccupancyGrid::free_count() const {
  Eigen::Index n = 0;
  for (Eigen::Index c = 0; c < cols(); ++c)
    for (Eigen::Index r = 0; r < rows(); ++r)
      if (cells(r, c) != 0) ++n;
  return n;
}

Eigen::VectorXd MapDistribution::probabilities() const {
  const Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  const Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

MapDistribution map_from_grid(const OccupancyGrid& grid, int n_samples,
                              std::uint64_t seed) {
  if (n_samples < 2)
    throw std::invalid_argument("map distribution needs at least two samples");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> free_cells;
  for (Eigen::Index r = 0; r < grid.rows(); ++r)
    for (Eigen::Index c = 0; c < grid.cols(); ++c)
      if (grid.free_at(r, c)) free_cells.emplace_back(r, c);
  if (free_cells.empty())
    throw std::invalid_argument("occupancy grid has no free cells");

  Rng rng(derive_seed(seed, 0x6d617073));
  MapDistribution map;
  map.points.resize(2, n_samples);
  std::set<std::pair<double, double>> seen;
  Eigen::Index filled = 0;
  std::uint64_t attempts = 0;
  const std::uint64_t cap = 10ull * static_cast<std::uint64_t>(n_samples) + 100;
  while (filled < n_samples) {
    if (++attempts > cap)
      throw std::runtime_error("map sampling failed to find distinct points");
    const auto [r, c] = free_cells[rng.below(free_cells.size())];
    const Vec2 p = grid.origin +
                   Vec2((static_cast<double>(c) + rng.uniform01()) * grid.cell_size_m,
                        (static_cast<double>(r) + rng.uniform01()) * grid.cell_size_m);
    if (!seen.insert({p.x(), p.y()}).second) continue;
    map.points.col(filled++) = p;
  }
  map.logits = Eigen::VectorXd::Zero(n_samples);
  return map;
}

OccupancyGrid rasterize_environment(const Environment& env, double cell_size_m,
                                    bool ignore_obstacles) {
  if (!(cell_size_m > 0.0))
    throw std::invalid_argument("cell size must be positive");
  const double w = env.bounds.width(), h = env.bounds.height();
  const auto cols = static_cast<Eigen::Index>(std::ceil(w / cell_size_m));
  const auto rows = static_cast<Eigen::Index>(std::ceil(h / cell_size_m));

  OccupancyGrid grid;
  grid.cell_size_m = cell_size_m;
  grid.origin = env.bounds.lo;
  grid.cells.setZero(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Vec2 center = grid.cell_center(r, c);
      const bool open = ignore_obstacles ? env.bounds.contains(center)
                                         : env.accessible(center);
      grid.cells(r, c) = open ? 1 : 0;
    }
  }
  return grid;
}

namespace {

constexpr double kBlockedBelow = 128.0;  // dark pixels block the cell

// pulls the next header token from a PGM, skipping whitespace and # comments
std::string pgm_token(const std::string& buf, std::size_t& pos,
                      const std::string& path) {
  while (pos < buf.size()) {
    const char ch = buf[pos];
    if (ch == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() &&
         !std::isspace(static_cast<unsigned char>(buf[pos])) && buf[pos] != '#')
    ++pos;
  if (start == pos) throw io_error("truncated PGM header in " + path);
  return buf.substr(start, pos - start);
}

long pgm_int(const std::string& buf, std::size_t& pos, const std::string& path) {
  const std::string tok = pgm_token(buf, pos, path);
  try {
    return std::stol(tok);
  } catch (const std::exception&) {
    throw io_error("bad PGM header value '" + tok + "' in " + path);
  }
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

unsigned char paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<unsigned char>(a);
  if (pb <= pc) return static_cast<unsigned char>(b);
  return static_cast<unsigned char>(c);
}

}  // namespace

Eigen::MatrixXd load_pgm(const std::string& path) {
  const std::string buf = text::read_file(path);
  std::size_t pos = 0;
  const std::string magic = pgm_token(buf, pos, path);
  if (magic != "P2" && magic != "P5")
    throw io_error("not a PGM file (" + magic + ") in " + path);
  const long width = pgm_int(buf, pos, path);
  const long height = pgm_int(buf, pos, path);
  const long maxval = pgm_int(buf, pos, path);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
    throw io_error("bad PGM dimensions in " + path);

  Eigen::MatrixXd out(height, width);
  const double scale = 255.0 / static_cast<double>(maxval);
  if (magic == "P2") {
    for (long r = 0; r < height; ++r)
      for (long c = 0; c < width; ++c)
        out(height - 1 - r, c) = scale * static_cast<double>(pgm_int(buf, pos, path));
    return out;
  }

  ++pos;  // P5: exactly one whitespace byte separates header and raster
  const int bytes = maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(width) *
                           static_cast<std::size_t>(height) *
                           static_cast<std::size_t>(bytes);
  if (pos + need > buf.size()) throw io_error("truncated PGM raster in " + path);
  const auto* raster = reinterpret_cast<const unsigned char*>(buf.data() + pos);
  for (long r = 0; r < height; ++r) {
    for (long c = 0; c < width; ++c) {
      const std::size_t i =
          (static_cast<std::size_t>(r) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c)) *
          static_cast<std::size_t>(bytes);
      const long v = bytes == 1 ? raster[i] : (long(raster[i]) << 8) | raster[i + 1];
      out(height - 1 - r, c) = scale * static_cast<double>(v);
    }
  }
  return out;
}

Eigen::MatrixXd load_png(const std::string& path) {
  const std::string buf = text::read_file(path);
  static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
    throw io_error("not a PNG file: " + path);

  const auto* data = reinterpret_cast<const unsigned char*>(buf.data());
  std::size_t pos = 8;
  long width = 0, height = 0;
  int color_type = -1, channels = 0;
  std::vector<unsigned char> idat, palette;
  bool saw_ihdr = false, saw_iend = false;

  while (!saw_iend) {
    if (pos + 12 > buf.size()) throw io_error("truncated PNG chunk in " + path);
    const std::uint32_t len = be32(data + pos);
    if (pos + 12 + len > buf.size())
      throw io_error("truncated PNG chunk in " + path);
    const std::string type(buf, pos + 4, 4);
    const unsigned char* body = data + pos + 8;
    const std::uint32_t crc_want = be32(body + len);
    const auto crc_got = static_cast<std::uint32_t>(
        crc32(crc32(0, data + pos + 4, 4), body, len));
    if (crc_want != crc_got)
      throw io_error("PNG chunk checksum mismatch in " + path);

    if (type == "IHDR") {
      if (len != 13) throw io_error("bad PNG header in " + path);
      width = be32(body);
      height = be32(body + 4);
      const int depth = body[8];
      color_type = body[9];
      const int interlace = body[12];
      if (depth != 8)
        throw io_error("unsupported PNG bit depth in " + path + " (need 8)");
      if (interlace != 0)
        throw io_error("interlaced PNG not supported: " + path);
      switch (color_type) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 3: channels = 1; break;
        case 4: channels = 2; break;
        case 6: channels = 4; break;
        default: throw io_error("unsupported PNG color type in " + path);
      }
      if (width < 1 || height < 1) throw io_error("bad PNG size in " + path);
      saw_ihdr = true;
    } else if (type == "PLTE") {
      palette.assign(body, body + len);
    } else if (type == "IDAT") {
      idat.insert(idat.end(), body, body + len);
    } else if (type == "IEND") {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || idat.empty()) throw io_error("incomplete PNG in " + path);

  const std::size_t stride =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  std::vector<unsigned char> raw((stride + 1) * static_cast<std::size_t>(height));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw io_error("PNG pixel data does not decompress in " + path);

  // undo the per-scanline filters in place
  std::vector<unsigned char> prev(stride, 0), cur(stride);
  Eigen::MatrixXd out(height, width);
  for (long r = 0; r < height; ++r) {
    const unsigned char* line = raw.data() + static_cast<std::size_t>(r) * (stride + 1);
    const int filter = line[0];
    for (std::size_t i = 0; i < stride; ++i) {
      const int x = line[1 + i];
      const int a = i >= static_cast<std::size_t>(channels)
                        ? cur[i - static_cast<std::size_t>(channels)] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<std::size_t>(channels)
                        ? prev[i - static_cast<std::size_t>(channels)] : 0;
      int v = 0;
      switch (filter) {
        case 0: v = x; break;
        case 1: v = x + a; break;
        case 2: v = x + b; break;
        case 3: v = x + (a + b) / 2; break;
        case 4: v = x + paeth(a, b, c); break;
        default: throw io_error("bad PNG filter type in " + path);
      }
      cur[i] = static_cast<unsigned char>(v & 0xff);
    }
    for (long col = 0; col < width; ++col) {
      const unsigned char* px = cur.data() + static_cast<std::size_t>(col) *
                                                 static_cast<std::size_t>(channels);
      double lum = 0.0;
      if (color_type == 2 || color_type == 6) {
        lum = (double(px[0]) + double(px[1]) + double(px[2])) / 3.0;
      } else if (color_type == 3) {
        const std::size_t idx = 3ull * px[0];
        if (idx + 2 >= palette.size())
          throw io_error("PNG palette index out of range in " + path);
        lum = (double(palette[idx]) + double(palette[idx + 1]) +
               double(palette[idx + 2])) /
              3.0;
      } else {
        lum = double(px[0]);
      }
      out(height - 1 - r, col) = lum;
    }
    prev = cur;
  }
  return out;
}

namespace {

Eigen::MatrixXd load_luminance(const std::string& path) {
  auto ends_with = [&](const char* suffix) {
    const std::string s = suffix;
    return path.size() >= s.size() &&
           path.compare(path.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".png") || ends_with(".PNG")) return load_png(path);
  if (ends_with(".pgm") || ends_with(".PGM")) return load_pgm(path);
  // unknown extension: sniff the signature
  const std::string head = text::read_file(path).substr(0, 2);
  if (head.size() == 2 && head[0] == char(137)) return load_png(path);
  return load_pgm(path);
}

}  // namespace

OccupancyGrid load_occupancy(const std::string& image_path,
                             const std::string& sidecar_path) {
  const Eigen::MatrixXd lum = load_luminance(image_path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text::read_file(sidecar_path));
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad map sidecar " + sidecar_path + ": " + e.what());
  }
  if (!j.contains("cell_size_m") || !j.contains("origin") ||
      !j["origin"].is_array() || j["origin"].size() != 2)
    throw io_error("map sidecar " + sidecar_path +
                   " needs cell_size_m and origin [x, y]");

  OccupancyGrid grid;
  grid.cell_size_m = j["cell_size_m"].get<double>();
  if (!(grid.cell_size_m > 0.0))
    throw io_error("map sidecar " + sidecar_path + " has a non-positive cell size");
  grid.origin = Vec2(j["origin"][0].get<double>(), j["origin"][1].get<double>());
  grid.cells.resize(lum.rows(), lum.cols());
  for (Eigen::Index c = 0; c < lum.cols(); ++c)
    for (Eigen::Index r = 0; r < lum.rows(); ++r)
      grid.cells(r, c) = lum(r, c) < kBlockedBelow ? 0 : 1;
  return grid;
}

void save_occupancy(const std::string& pgm_path, const std::string& sidecar_path,
                    const OccupancyGrid& grid) {
  std::ostringstream os;
  os << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
  for (Eigen::Index r = grid.rows() - 1; r >= 0; --r)
    for (Eigen::Index c = 0; c < grid.cols(); ++c)
      os.put(grid.free_at(r, c) ? char(255) : char(0));
  text::write_file(pgm_path, os.str());

  nlohmann::json j;
  j["cell_size_m"] = grid.cell_size_m;
  j["origin"] = {grid.origin.x(), grid.origin.y()};
  text::write_file(sidecar_path, j.dump(2) + "\n");
}

void export_map_csv(const std::string& path, const MapDistribution& map) {
  const Eigen::VectorXd q = map.probabilities();
  std::ostringstream os;
  os << "x,y,probability\n";
  for (Eigen::Index i = 0; i < map.size(); ++i)
    os << text::fmt(map.points(0, i)) << ',' << text::fmt(map.points(1, i))
       << ',' << text::fmt(q[i]) << '\n';
  text::write_file(path, os.str());
}

}  // namespace velochart
