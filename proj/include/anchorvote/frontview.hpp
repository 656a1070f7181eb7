#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <vector>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/geometry.hpp"

namespace anchorvote::frontview {

inline constexpr double kDegree = std::numbers::pi / 180.0;

// Angular resolution and field of view of the front-view grid. The defaults
// follow a Velodyne HDL-64 forward field of view.
struct ProjectionConfig {
  double delta_theta = 0.4 * kDegree;  // radians per column
  double delta_phi = 0.4 * kDegree;    // radians per row
  double theta_min = -45.0 * kDegree;
  double theta_max = 45.0 * kDegree;
  double phi_min = -24.9 * kDegree;
  double phi_max = 2.0 * kDegree;

  void validate() const;
  int col_offset() const;
  int row_offset() const;
  int cols() const;
  int rows() const;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// floor() that forgives values lying within 1e-9 below an integer, so grid
// arithmetic such as (-pi/2) / (pi/180) lands on -90 and not -91.
int snapped_floor(double v);

// Row/column of the cell that a point falls in, or std::nullopt when the ray
// leaves the configured angular range. Throws InvalidArgumentError for points
// on the vertical axis (x = y = 0), where azimuth is undefined.
std::optional<Cell> project_point(const geometry::Vec3& p, const ProjectionConfig& cfg);

// Unclamped grid coordinates; used for boxes whose corners may leave the grid.
struct GridCoord {
  long row = 0;
  long col = 0;
};
GridCoord grid_coord(const geometry::Vec3& p, const ProjectionConfig& cfg);

enum Channel : int { kHeight = 0, kDistance = 1, kIntensity = 2 };

// Dense rows x cols x 3 front-view grid. Row 0 holds the lowest elevation.
// Empty cells carry 0 in every channel; `occupied` is authoritative.
struct FrontViewMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // (row * cols + col) * 3 + channel
  std::vector<std::uint8_t> occupied;
  std::vector<std::int64_t> source;  // index of the point kept per cell, -1 if empty

  FrontViewMap() = default;
  FrontViewMap(int n_rows, int n_cols);

  double at(int row, int col, int channel) const {
    return values[(static_cast<std::size_t>(row) * cols + col) * 3 + channel];
  }
  bool is_occupied(int row, int col) const { return occupied[static_cast<std::size_t>(row) * cols + col] != 0; }
  std::size_t occupied_count() const;
};

// Projects every point; collisions keep the nearest point (lower index on an
// exact tie). Points on the vertical axis or out of range are skipped.
FrontViewMap build_map(const cloudio::PointCloud& cloud, const ProjectionConfig& cfg);

// Integer cell rectangle [row0, row0 + n_rows) x [col0, col0 + n_cols).
struct GridRect {
  int row0 = 0;
  int col0 = 0;
  int n_rows = 0;
  int n_cols = 0;
};

struct Patch {
  int size = 0;
  std::vector<double> values;  // (i * size + j) * 3 + channel
  std::vector<std::uint8_t> mask;

  double occupied_fraction() const;
};

// Crops `rect` (cells outside the map read as empty) and resamples it to
// out_size x out_size by nearest neighbour. A window whose size already
// equals out_size is therefore a plain crop.
Patch crop_patch(const FrontViewMap& map, const GridRect& rect, int out_size);

// Window of the given size centred on the map.
GridRect center_window(const FrontViewMap& map, int n_rows, int n_cols);

// Writes one binary PGM per channel (<stem>_height.pgm, ...), top row = highest
// elevation, each channel scaled to its occupied min/max.
void write_channel_pgms(const FrontViewMap& map, const std::filesystem::path& stem);

}  // namespace anchorvote::frontview
