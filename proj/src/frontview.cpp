#include "anchorvote/frontview.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "anchorvote/error.hpp"

namespace anchorvote::frontview {

namespace {
constexpr double kSnap = 1e-9;

int snapped_ceil(double v) { return static_cast<int>(std::ceil(v - kSnap)); }
}  // namespace

int snapped_floor(double v) { return static_cast<int>(std::floor(v + kSnap)); }

void ProjectionConfig::validate() const {
  if (!(delta_theta > 0.0 && delta_phi > 0.0)) throw InvalidArgumentError("angular resolution must be positive");
  if (!(theta_max > theta_min && phi_max > phi_min)) throw InvalidArgumentError("angular ranges must be non-empty");
}

int ProjectionConfig::col_offset() const { return snapped_floor(theta_min / delta_theta); }
int ProjectionConfig::row_offset() const { return snapped_floor(phi_min / delta_phi); }
int ProjectionConfig::cols() const { return snapped_ceil(theta_max / delta_theta) - col_offset(); }
int ProjectionConfig::rows() const { return snapped_ceil(phi_max / delta_phi) - row_offset(); }

GridCoord grid_coord(const geometry::Vec3& p, const ProjectionConfig& cfg) {
  if (p.x == 0.0 && p.y == 0.0) throw InvalidArgumentError("azimuth undefined for a point on the vertical axis");
  const double theta = std::atan2(p.y, p.x);
  const double phi = std::atan2(p.z, std::sqrt(p.x * p.x + p.y * p.y));
  return {static_cast<long>(snapped_floor(phi / cfg.delta_phi)) - cfg.row_offset(),
          static_cast<long>(snapped_floor(theta / cfg.delta_theta)) - cfg.col_offset()};
}

std::optional<Cell> project_point(const geometry::Vec3& p, const ProjectionConfig& cfg) {
  const GridCoord g = grid_coord(p, cfg);
  if (g.row < 0 || g.row >= cfg.rows() || g.col < 0 || g.col >= cfg.cols()) return std::nullopt;
  return Cell{static_cast<int>(g.row), static_cast<int>(g.col)};
}

FrontViewMap::FrontViewMap(int n_rows, int n_cols)
    : rows(n_rows),
      cols(n_cols),
      values(static_cast<std::size_t>(n_rows) * n_cols * 3, 0.0),
      occupied(static_cast<std::size_t>(n_rows) * n_cols, 0),
      source(static_cast<std::size_t>(n_rows) * n_cols, -1) {}

std::size_t FrontViewMap::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), 1));
}

FrontViewMap build_map(const cloudio::PointCloud& cloud, const ProjectionConfig& cfg) {
  cfg.validate();
  FrontViewMap map(cfg.rows(), cfg.cols());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& pt = cloud.points[i];
    if (pt.x == 0.0 && pt.y == 0.0) continue;
    const auto cell = project_point(pt.xyz(), cfg);
    if (!cell) continue;
    const double dist = std::sqrt(pt.x * pt.x + pt.y * pt.y + pt.z * pt.z);
    const std::size_t k = static_cast<std::size_t>(cell->row) * map.cols + cell->col;
    // Iterating in index order, a strict comparison keeps the lower index on ties.
    if (map.occupied[k] && map.values[k * 3 + kDistance] <= dist) continue;
    map.occupied[k] = 1;
    map.source[k] = static_cast<std::int64_t>(i);
    map.values[k * 3 + kHeight] = pt.z;
    map.values[k * 3 + kDistance] = dist;
    map.values[k * 3 + kIntensity] = pt.intensity;
  }
  return map;
}

double Patch::occupied_fraction() const {
  if (mask.empty()) return 0.0;
  const auto n = std::count(mask.begin(), mask.end(), 1);
  return static_cast<double>(n) / static_cast<double>(mask.size());
}

Patch crop_patch(const FrontViewMap& map, const GridRect& rect, int out_size) {
  if (rect.n_rows <= 0 || rect.n_cols <= 0) throw InvalidArgumentError("crop rectangle has zero area");
  if (out_size <= 0) throw InvalidArgumentError("patch size must be positive");
  if (rect.row0 >= map.rows || rect.col0 >= map.cols || rect.row0 + rect.n_rows <= 0 ||
      rect.col0 + rect.n_cols <= 0) {
    throw InvalidArgumentError("crop rectangle lies outside the map");
  }
  Patch patch;
  patch.size = out_size;
  patch.values.assign(static_cast<std::size_t>(out_size) * out_size * 3, 0.0);
  patch.mask.assign(static_cast<std::size_t>(out_size) * out_size, 0);
  for (int i = 0; i < out_size; ++i) {
    const int r = rect.row0 + static_cast<int>((static_cast<long>(2 * i + 1) * rect.n_rows) / (2L * out_size));
    if (r < 0 || r >= map.rows) continue;
    for (int j = 0; j < out_size; ++j) {
      const int c = rect.col0 + static_cast<int>((static_cast<long>(2 * j + 1) * rect.n_cols) / (2L * out_size));
      if (c < 0 || c >= map.cols || !map.is_occupied(r, c)) continue;
      const std::size_t dst = static_cast<std::size_t>(i) * out_size + j;
      patch.mask[dst] = 1;
      for (int ch = 0; ch < 3; ++ch) patch.values[dst * 3 + ch] = map.at(r, c, ch);
    }
  }
  return patch;
}

GridRect center_window(const FrontViewMap& map, int n_rows, int n_cols) {
  return {(map.rows - n_rows) / 2, (map.cols - n_cols) / 2, n_rows, n_cols};
}

void write_channel_pgms(const FrontViewMap& map, const std::filesystem::path& stem) {
  static constexpr const char* kNames[3] = {"height", "distance", "intensity"};
  for (int ch = 0; ch < 3; ++ch) {
    double lo = 0.0;
    double hi = 0.0;
    bool first = true;
    for (int r = 0; r < map.rows; ++r) {
      for (int c = 0; c < map.cols; ++c) {
        if (!map.is_occupied(r, c)) continue;
        const double v = map.at(r, c, ch);
        lo = first ? v : std::min(lo, v);
        hi = first ? v : std::max(hi, v);
        first = false;
      }
    }
    std::string img = "P5\n" + std::to_string(map.cols) + " " + std::to_string(map.rows) + "\n255\n";
    for (int r = map.rows - 1; r >= 0; --r) {
      for (int c = 0; c < map.cols; ++c) {
        unsigned char px = 0;
        if (map.is_occupied(r, c)) {
          const double t = hi > lo ? (map.at(r, c, ch) - lo) / (hi - lo) : 1.0;
          px = static_cast<unsigned char>(std::lround(32.0 + 223.0 * t));
        }
        img.push_back(static_cast<char>(px));
      }
    }
    auto path = stem;
    path += std::string("_") + kNames[ch] + ".pgm";
    cloudio::atomic_write(path, img);
  }
}

}  // namespace anchorvote::frontview
