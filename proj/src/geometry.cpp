#include "anchorvote/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "anchorvote/error.hpp"

namespace anchorvote::geometry {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::array<Vec2, 4> rect_corners(Vec2 c, double w, double h, double angle) {
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  const double hw = 0.5 * w;
  const double hh = 0.5 * h;
  const std::array<Vec2, 4> local{{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}};
  std::array<Vec2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {c.x + ca * local[i].x - sa * local[i].y, c.y + sa * local[i].x + ca * local[i].y};
  }
  return out;
}

// Intersection of segment p->q with the infinite line through a->b.
Vec2 line_intersection(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  const double d1 = cross(a, b, p);
  const double d2 = cross(a, b, q);
  const double t = d1 / (d1 - d2);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace

double normalize_yaw(double yaw) {
  if (yaw >= -std::numbers::pi && yaw < std::numbers::pi) return yaw;
  double y = std::fmod(yaw + std::numbers::pi, kTwoPi);
  if (y < 0.0) y += kTwoPi;
  if (y >= kTwoPi) y -= kTwoPi;
  return y - std::numbers::pi;
}

Box3D::Box3D(Vec3 c, Vec3 s, double heading) : center(c), scale(s), yaw(normalize_yaw(heading)) {
  if (!(s.x > 0.0 && s.y > 0.0 && s.z > 0.0)) {
    throw InvalidArgumentError("Box3D scale must be positive on every axis");
  }
  if (!std::isfinite(c.x) || !std::isfinite(c.y) || !std::isfinite(c.z) || !std::isfinite(heading)) {
    throw InvalidArgumentError("Box3D center and yaw must be finite");
  }
}

std::array<Vec2, 4> Box3D::bev_corners() const {
  return rect_corners({center.x, center.y}, scale.x, scale.y, yaw);
}

std::array<Vec3, 8> Box3D::corners() const {
  const auto fp = bev_corners();
  std::array<Vec3, 8> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {fp[i].x, fp[i].y, z_min()};
    out[i + 4] = {fp[i].x, fp[i].y, z_max()};
  }
  return out;
}

std::array<Vec2, 4> Rect2D::corners() const { return rect_corners(center, width, height, angle); }

bool contains(const Box3D& box, const Vec3& p) {
  const double dx = p.x - box.center.x;
  const double dy = p.y - box.center.y;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  const double lz = p.z - box.center.z;
  return std::abs(lx) <= 0.5 * box.scale.x && std::abs(ly) <= 0.5 * box.scale.y &&
         std::abs(lz) <= 0.5 * box.scale.z;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clipper) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  const std::size_t n = clipper.size();
  for (std::size_t e = 0; e < n && !output.empty(); ++e) {
    const Vec2& a = clipper[e];
    const Vec2& b = clipper[(e + 1) % n];
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + input.size() - 1) % input.size()];
      const bool cur_in = cross(a, b, cur) >= 0.0;
      const bool prev_in = cross(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) output.push_back(line_intersection(prev, cur, a, b));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(line_intersection(prev, cur, a, b));
      }
    }
  }
  return output;
}

double polygon_area(std::span<const Vec2> poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    acc += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(acc);
}

double intersection_area(const Rect2D& a, const Rect2D& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  // Averaging both clip orders makes the result exactly symmetric in (a, b).
  const double area = 0.5 * (polygon_area(clip_convex(ca, cb)) + polygon_area(clip_convex(cb, ca)));
  return area < kAreaEpsilon ? 0.0 : area;
}

double iou_2d(const Rect2D& a, const Rect2D& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Rect2D bev_rect(const Box3D& box) {
  return Rect2D{{box.center.x, box.center.y}, box.scale.x, box.scale.y, box.yaw};
}

double iou_bev(const Box3D& a, const Box3D& b) {
  if (a == b) return 1.0;
  return iou_2d(bev_rect(a), bev_rect(b));
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (a == b) return 1.0;
  const double overlap_z = std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min());
  if (overlap_z <= 0.0) return 0.0;
  const double inter = intersection_area(bev_rect(a), bev_rect(b)) * overlap_z;
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d_oracle(const Box3D& a, const Box3D& b, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw InvalidArgumentError("iou_3d_oracle needs at least one sample");
  Vec3 lo{1e300, 1e300, 1e300};
  Vec3 hi{-1e300, -1e300, -1e300};
  for (const Box3D* box : {&a, &b}) {
    for (const Vec3& c : box->corners()) {
      lo = {std::min(lo.x, c.x), std::min(lo.y, c.y), std::min(lo.z, c.z)};
      hi = {std::max(hi.x, c.x), std::max(hi.y, c.y), std::max(hi.z, c.z)};
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo.x, hi.x);
  std::uniform_real_distribution<double> uy(lo.y, hi.y);
  std::uniform_real_distribution<double> uz(lo.z, hi.z);
  std::size_t in_both = 0;
  std::size_t in_any = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const Vec3 p{ux(rng), uy(rng), uz(rng)};
    const bool ia = contains(a, p);
    const bool ib = contains(b, p);
    in_both += (ia && ib) ? 1 : 0;
    in_any += (ia || ib) ? 1 : 0;
  }
  return in_any == 0 ? 0.0 : static_cast<double>(in_both) / static_cast<double>(in_any);
}

std::vector<std::size_t> nms_indices(std::span<const Proposal> proposals, double iou_threshold,
                                     NmsMode mode, std::span<const Rect2D> rects) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw InvalidArgumentError("NMS threshold must lie in [0, 1]");
  }
  if (mode == NmsMode::k2d && rects.size() != proposals.size()) {
    throw InvalidArgumentError("2D NMS needs one rectangle per proposal");
  }
  std::vector<std::size_t> order(proposals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return proposals[l].score > proposals[r].score;
  });

  auto overlap = [&](std::size_t i, std::size_t j) {
    switch (mode) {
      case NmsMode::kBev:
        return iou_bev(proposals[i].box, proposals[j].box);
      case NmsMode::k3d:
        return iou_3d(proposals[i].box, proposals[j].box);
      case NmsMode::k2d:
        return iou_2d(rects[i], rects[j]);
    }
    return 0.0;
  };

  std::vector<char> suppressed(proposals.size(), 0);
  std::vector<std::size_t> keep;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && overlap(i, j) > iou_threshold) suppressed[j] = 1;
    }
  }
  return keep;
}

std::vector<Proposal> nms(std::span<const Proposal> proposals, double iou_threshold, NmsMode mode,
                          std::span<const Rect2D> rects) {
  std::vector<Proposal> out;
  for (std::size_t i : nms_indices(proposals, iou_threshold, mode, rects)) out.push_back(proposals[i]);
  return out;
}

}  // namespace anchorvote::geometry
