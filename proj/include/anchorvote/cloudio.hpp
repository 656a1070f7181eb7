#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "anchorvote/geometry.hpp"

namespace anchorvote::cloudio {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  geometry::Vec3 xyz() const { return {x, y, z}; }
  friend bool operator==(const Point&, const Point&) = default;
};

struct PointCloud {
  std::vector<Point> points;
  std::string frame_id = "velodyne";

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

// Throws InvalidArgumentError if a coordinate is non-finite or an intensity
// falls outside [0, 1].
void validate(const PointCloud& cloud);

// KITTI Velodyne scan: consecutive little-endian float32 (x, y, z, intensity)
// records, 16 bytes each.
PointCloud read_velodyne_bin(const std::filesystem::path& path);
void write_velodyne_bin(const PointCloud& cloud, const std::filesystem::path& path);

// Annotations that place a truth object in a KITTI difficulty bin.
struct TruthAnnotation {
  double height_px = 0.0;
  int occlusion = 0;
  double truncation = 0.0;

  friend bool operator==(const TruthAnnotation&, const TruthAnnotation&) = default;
};

struct TruthObject {
  geometry::Box3D box;
  int label = 0;
  std::optional<TruthAnnotation> annotation;

  friend bool operator==(const TruthObject&, const TruthObject&) = default;
};

struct SceneParams {
  int n_objects = 3;
  // Placement region on the ground plane, vehicle frame (x forward, y left).
  double x_min = 0.0;
  double x_max = 70.0;
  double y_min = -35.0;
  double y_max = 35.0;
  // Objects are kept inside this range band and azimuth half-angle so they
  // are visible to the simulated scanner.
  double min_range = 8.0;
  double max_range = 40.0;
  double max_azimuth = 0.70;  // radians
  // Every object must collect at least this many returns; placements that
  // fall short are redrawn.
  int points_per_object = 50;
  double noise_sigma = 0.02;
  int n_ground_points = 200;
  double ground_z = -1.78;
  double size_jitter = 0.10;
  geometry::Vec3 prior_scale{3.9, 1.6, 1.56};
  // Simulated scanner: beam grid resolution and field of view (radians).
  double scan_delta_theta = 0.2 * std::numbers::pi / 180.0;
  double scan_delta_phi = 0.2 * std::numbers::pi / 180.0;
  double scan_theta_min = -45.0 * std::numbers::pi / 180.0;
  double scan_theta_max = 45.0 * std::numbers::pi / 180.0;
  double scan_phi_min = -24.9 * std::numbers::pi / 180.0;
  double scan_phi_max = 2.0 * std::numbers::pi / 180.0;
  // Camera focal length used for the image-height annotation.
  double focal_px = 721.5;
  std::uint64_t rng_seed = 0;
  // When non-empty these boxes are used verbatim instead of random placement.
  std::vector<geometry::Box3D> fixed_objects;
};

struct SyntheticScene {
  PointCloud cloud;
  std::vector<TruthObject> truth;

  friend bool operator==(const SyntheticScene&, const SyntheticScene&) = default;
};

SyntheticScene generate_scene(const SceneParams& params);

// Line-oriented detection files. One header line, then one proposal per line:
// class score cx cy cz dx dy dz yaw p_0 ... p_{L-1} source_anchor
// Values are printed with 17 significant digits so they read back exactly.
inline constexpr const char* kDetectionHeader = "# anchorvote-detections v1";
inline constexpr const char* kTruthHeader = "# anchorvote-truth v1";

void write_detections(const std::vector<geometry::Proposal>& dets, const std::filesystem::path& path);
std::vector<geometry::Proposal> read_detections(const std::filesystem::path& path);

// Truth files: label cx cy cz dx dy dz yaw height_px occlusion truncation
// (the last three are "-" when unannotated).
void write_truth(const std::vector<TruthObject>& truth, const std::filesystem::path& path);
std::vector<TruthObject> read_truth(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace anchorvote::cloudio
