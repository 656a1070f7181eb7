#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace anchorvote::geometry {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Wraps an angle into [-pi, pi).
double normalize_yaw(double yaw);

// Oriented 3D box. `scale` holds the full edge lengths along the box-local
// x (length), y (width) and z (height) axes; yaw rotates about +z.
struct Box3D {
  Vec3 center;
  Vec3 scale{1.0, 1.0, 1.0};
  double yaw = 0.0;

  Box3D() = default;
  Box3D(Vec3 c, Vec3 s, double heading);

  double volume() const { return scale.x * scale.y * scale.z; }
  double z_min() const { return center.z - 0.5 * scale.z; }
  double z_max() const { return center.z + 0.5 * scale.z; }

  // Footprint corners, counter-clockwise.
  std::array<Vec2, 4> bev_corners() const;
  // Bottom four (CCW) followed by top four.
  std::array<Vec3, 8> corners() const;

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

// Rotated rectangle in a 2D plane (BEV footprint or image/map plane).
struct Rect2D {
  Vec2 center;
  double width = 1.0;   // along the rotated u axis
  double height = 1.0;  // along the rotated v axis
  double angle = 0.0;

  std::array<Vec2, 4> corners() const;
  double area() const { return width * height; }
};

// Detection or proposal: a box plus its objectness and class distribution.
struct Proposal {
  Box3D box;
  double score = 0.0;
  std::vector<double> class_probs{1.0};
  std::int64_t source_anchor = -1;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

// Intersections smaller than this (m^2) count as empty.
inline constexpr double kAreaEpsilon = 1e-12;

bool contains(const Box3D& box, const Vec3& p);

// Sutherland-Hodgman clip of a convex polygon against a convex CCW clipper.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clipper);
double polygon_area(std::span<const Vec2> poly);

double intersection_area(const Rect2D& a, const Rect2D& b);
double iou_2d(const Rect2D& a, const Rect2D& b);
double iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

// Monte-Carlo IoU: uniform samples over the axis-aligned bounds of a and b.
double iou_3d_oracle(const Box3D& a, const Box3D& b, std::size_t n_samples, std::uint64_t seed);

Rect2D bev_rect(const Box3D& box);

enum class NmsMode { kBev, k3d, k2d };

// Greedy NMS. Survivors come back sorted by descending score with ties broken
// by input order. Mode k2d reads the per-proposal rectangles from `rects`.
std::vector<Proposal> nms(std::span<const Proposal> proposals, double iou_threshold,
                          NmsMode mode, std::span<const Rect2D> rects = {});

// Same as nms() but returns the indices of the survivors.
std::vector<std::size_t> nms_indices(std::span<const Proposal> proposals, double iou_threshold,
                                     NmsMode mode, std::span<const Rect2D> rects = {});

}  // namespace anchorvote::geometry
