#include "anchorvote/uvpm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "anchorvote/error.hpp"
#include "anchorvote/micronet/layers.hpp"

namespace anchorvote::uvpm {

using geometry::Box3D;
using geometry::Vec2;
using geometry::Vec3;

namespace {

std::size_t grid_count(double span, double spacing) {
  const double n = std::ceil(span / spacing - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

// Eigenvalues of a symmetric 3x3 matrix, descending.
std::array<double, 3> symmetric_eigenvalues(double a00, double a11, double a22, double a01, double a02, double a12) {
  const double p1 = a01 * a01 + a02 * a02 + a12 * a12;
  if (p1 == 0.0) {
    std::array<double, 3> e{a00, a11, a22};
    std::sort(e.begin(), e.end(), std::greater<>());
    return e;
  }
  const double q = (a00 + a11 + a22) / 3.0;
  const double p2 = (a00 - q) * (a00 - q) + (a11 - q) * (a11 - q) + (a22 - q) * (a22 - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const double b00 = (a00 - q) / p, b11 = (a11 - q) / p, b22 = (a22 - q) / p;
  const double b01 = a01 / p, b02 = a02 / p, b12 = a12 / p;
  const double det = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) + b02 * (b01 * b12 - b11 * b02);
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e0 = q + 2.0 * p * std::cos(phi);
  const double e2 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {e0, 3.0 * q - e0 - e2, e2};
}

std::vector<Vec3> positions(const cloudio::PointCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) out.push_back(p.xyz());
  return out;
}

double dist2(const Vec3& a, const Vec3& b) {
  return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z);
}

}  // namespace

void UvpmConfig::validate() const {
  if (!(spacing > 0.0)) throw InvalidArgumentError("anchor spacing must be positive");
  if (!(x_max > x_min && y_max > y_min)) throw InvalidArgumentError("anchor extent must be non-empty");
  if (!(prior_scale.x > 0.0 && prior_scale.y > 0.0 && prior_scale.z > 0.0)) {
    throw InvalidArgumentError("prior scale must be positive");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw InvalidArgumentError("density threshold must be >= 0");
  if (!(epsilon > 0.0)) throw InvalidArgumentError("expansion factor must be positive");
  if (shell_tolerance < 0) throw InvalidArgumentError("shell tolerance must be >= 0");
  if (patch_size < 1) throw InvalidArgumentError("patch size must be positive");
  if (n_seeds < 1 || k_clusters < 1) throw InvalidArgumentError("seed and cluster counts must be at least 1");
  if (!(vote_radius > 0.0 && cluster_radius > 0.0)) throw InvalidArgumentError("radii must be positive");
  if (min_vote_points < 1) throw InvalidArgumentError("min_vote_points must be at least 1");
  if (yaw_steps < 1) throw InvalidArgumentError("yaw_steps must be at least 1");
  if (!(nms_threshold >= 0.0 && nms_threshold <= 1.0)) throw InvalidArgumentError("NMS threshold must lie in [0, 1]");
  if (learned_points < 1) throw InvalidArgumentError("learned_points must be at least 1");
}

Vec3 AnchorGrid::center(std::size_t i) const {
  return {x_min + static_cast<double>(i / ny) * spacing, y_min + static_cast<double>(i % ny) * spacing, z};
}

Box3D AnchorGrid::box(std::size_t i) const { return Box3D(center(i), scale, 0.0); }

AnchorGrid build_anchor_grid(const UvpmConfig& cfg) {
  cfg.validate();
  AnchorGrid g;
  g.spacing = cfg.spacing;
  g.x_min = cfg.x_min;
  g.y_min = cfg.y_min;
  g.nx = grid_count(cfg.x_max - cfg.x_min, cfg.spacing);
  g.ny = grid_count(cfg.y_max - cfg.y_min, cfg.spacing);
  g.scale = cfg.prior_scale;
  g.z = cfg.anchor_z;
  return g;
}

std::optional<frontview::GridRect> box_grid_rect(const Box3D& box, const frontview::ProjectionConfig& proj,
                                                 const frontview::FrontViewMap& map) {
  long rmin = std::numeric_limits<long>::max(), rmax = std::numeric_limits<long>::min();
  long cmin = rmin, cmax = rmax;
  for (const Vec3& c : box.corners()) {
    if (c.x <= 0.0) return std::nullopt;
    const auto g = frontview::grid_coord(c, proj);
    rmin = std::min(rmin, g.row);
    rmax = std::max(rmax, g.row);
    cmin = std::min(cmin, g.col);
    cmax = std::max(cmax, g.col);
  }
  if (rmax < 0 || cmax < 0 || rmin >= map.rows || cmin >= map.cols) return std::nullopt;
  return frontview::GridRect{static_cast<int>(rmin), static_cast<int>(cmin), static_cast<int>(rmax - rmin + 1),
                             static_cast<int>(cmax - cmin + 1)};
}

std::optional<double> density(const Box3D& anchor, const frontview::FrontViewMap& map,
                              const frontview::ProjectionConfig& proj, int patch_size) {
  const auto rect = box_grid_rect(anchor, proj, map);
  if (!rect) return std::nullopt;
  return frontview::crop_patch(map, *rect, patch_size).occupied_fraction();
}

std::vector<Anchor> filter_anchors(const AnchorGrid& grid, const frontview::FrontViewMap& map,
                                   const frontview::ProjectionConfig& proj, const UvpmConfig& cfg) {
  std::vector<Anchor> out;
  if (map.occupied_count() == 0) return out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Box3D box = grid.box(i);
    const auto d = density(box, map, proj, cfg.patch_size);
    if (d && *d >= cfg.delta) out.push_back({i, box, *d});
  }
  return out;
}

PointIndex::PointIndex(std::vector<Vec3> points, double cell) : points_(std::move(points)), cell_(cell) {
  if (!(cell > 0.0)) throw InvalidArgumentError("index cell size must be positive");
  if (points_.empty()) return;
  double x0 = points_[0].x, x1 = x0, y0 = points_[0].y, y1 = y0;
  for (const auto& p : points_) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  ox_ = x0;
  oy_ = y0;
  nx_ = static_cast<long>(std::floor((x1 - x0) / cell_)) + 1;
  ny_ = static_cast<long>(std::floor((y1 - y0) / cell_)) + 1;
  buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const long bx = std::min(nx_ - 1, static_cast<long>(std::floor((points_[i].x - ox_) / cell_)));
    const long by = std::min(ny_ - 1, static_cast<long>(std::floor((points_[i].y - oy_) / cell_)));
    buckets_[static_cast<std::size_t>(bx * ny_ + by)].push_back(i);
  }
}

PointIndex PointIndex::above(const cloudio::PointCloud& cloud, double min_z, double cell) {
  std::vector<Vec3> pts;
  for (const auto& p : cloud.points) {
    if (p.z >= min_z) pts.push_back(p.xyz());
  }
  return PointIndex(std::move(pts), cell);
}

template <typename F>
void PointIndex::visit(double x0, double y0, double x1, double y1, F&& f) const {
  if (points_.empty()) return;
  const long bx0 = std::max(0L, static_cast<long>(std::floor((x0 - ox_) / cell_)));
  const long bx1 = std::min(nx_ - 1, static_cast<long>(std::floor((x1 - ox_) / cell_)));
  const long by0 = std::max(0L, static_cast<long>(std::floor((y0 - oy_) / cell_)));
  const long by1 = std::min(ny_ - 1, static_cast<long>(std::floor((y1 - oy_) / cell_)));
  for (long bx = bx0; bx <= bx1; ++bx) {
    for (long by = by0; by <= by1; ++by) {
      for (std::size_t i : buckets_[static_cast<std::size_t>(bx * ny_ + by)]) f(i);
    }
  }
}

std::size_t PointIndex::count_in_box(const Box3D& box) const {
  const auto bev = box.bev_corners();
  double x0 = bev[0].x, x1 = x0, y0 = bev[0].y, y1 = y0;
  for (const auto& c : bev) {
    x0 = std::min(x0, c.x);
    x1 = std::max(x1, c.x);
    y0 = std::min(y0, c.y);
    y1 = std::max(y1, c.y);
  }
  std::size_t n = 0;
  visit(x0, y0, x1, y1, [&](std::size_t i) { n += geometry::contains(box, points_[i]) ? 1 : 0; });
  return n;
}

std::vector<std::size_t> PointIndex::within_radius(const Vec2& c, double radius) const {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  visit(c.x - radius, c.y - radius, c.x + radius, c.y + radius, [&](std::size_t i) {
    const double dx = points_[i].x - c.x;
    const double dy = points_[i].y - c.y;
    if (dx * dx + dy * dy <= r2) out.push_back(i);
  });
  std::sort(out.begin(), out.end());
  return out;
}

double ground_cut(const UvpmConfig& cfg) { return cfg.anchor_z - 0.5 * cfg.prior_scale.z + cfg.ground_clearance; }

bool expansion_check(const Box3D& anchor, const PointIndex& index, const UvpmConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw InvalidArgumentError("expansion factor must be positive");
  const double f = 1.0 + cfg.epsilon;
  const Box3D grown(anchor.center, {anchor.scale.x * f, anchor.scale.y * f, anchor.scale.z * f}, anchor.yaw);
  const std::size_t outer = index.count_in_box(grown);
  const std::size_t inner = index.count_in_box(anchor);
  return outer - inner <= static_cast<std::size_t>(cfg.shell_tolerance);
}

bool expansion_check(const Box3D& anchor, const cloudio::PointCloud& cloud, const UvpmConfig& cfg) {
  return expansion_check(anchor, PointIndex::above(cloud, ground_cut(cfg)), cfg);
}

cloudio::PointCloud make_pseudo_cloud(std::span<const Anchor> survivors) {
  cloudio::PointCloud pc;
  pc.frame_id = "pseudo";
  pc.points.reserve(survivors.size());
  for (const auto& a : survivors) pc.points.push_back({a.box.center.x, a.box.center.y, a.box.center.z, a.density});
  return pc;
}

std::vector<Seed> generate_seeds(const cloudio::PointCloud& pseudo, const PointIndex& index, const UvpmConfig& cfg) {
  if (pseudo.empty()) throw InvalidArgumentError("cannot draw seeds from an empty pseudo cloud");
  if (cfg.n_seeds < 1) throw InvalidArgumentError("n_seeds must be at least 1");
  const auto xyz = positions(pseudo);
  std::vector<Seed> seeds;
  for (std::size_t i : micronet::farthest_point_sample(xyz, cfg.n_seeds)) {
    Seed s;
    s.pseudo_index = i;
    s.xyz = xyz[i];
    const auto nbr = index.within_radius({s.xyz.x, s.xyz.y}, cfg.vote_radius);
    s.feature.assign(7, 0.0);
    s.feature[0] = static_cast<double>(nbr.size());
    if (!nbr.empty()) {
      Vec3 m;
      for (std::size_t k : nbr) {
        m.x += index.points()[k].x;
        m.y += index.points()[k].y;
        m.z += index.points()[k].z;
      }
      const double n = static_cast<double>(nbr.size());
      m = {m.x / n, m.y / n, m.z / n};
      double c[6] = {0, 0, 0, 0, 0, 0};
      for (std::size_t k : nbr) {
        const Vec3& p = index.points()[k];
        const double dx = p.x - m.x, dy = p.y - m.y, dz = p.z - m.z;
        c[0] += dx * dx;
        c[1] += dy * dy;
        c[2] += dz * dz;
        c[3] += dx * dy;
        c[4] += dx * dz;
        c[5] += dy * dz;
      }
      for (double& v : c) v /= n;
      const auto e = symmetric_eigenvalues(c[0], c[1], c[2], c[3], c[4], c[5]);
      s.feature[1] = m.x - s.xyz.x;
      s.feature[2] = m.y - s.xyz.y;
      s.feature[3] = m.z - s.xyz.z;
      s.feature[4] = e[0];
      s.feature[5] = e[1];
      s.feature[6] = e[2];
    }
    seeds.push_back(std::move(s));
  }
  return seeds;
}

std::vector<Vote> vote(std::span<const Seed> seeds, const PointIndex& index, const UvpmConfig& cfg) {
  std::vector<Vote> votes;
  double max_count = 0.0;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto nbr = index.within_radius({seeds[s].xyz.x, seeds[s].xyz.y}, cfg.vote_radius);
    if (nbr.size() < static_cast<std::size_t>(cfg.min_vote_points)) continue;
    Vec3 m;
    for (std::size_t k : nbr) {
      m.x += index.points()[k].x;
      m.y += index.points()[k].y;
      m.z += index.points()[k].z;
    }
    const double n = static_cast<double>(nbr.size());
    votes.push_back({s, {m.x / n, m.y / n, m.z / n}, n});
    max_count = std::max(max_count, n);
  }
  for (auto& v : votes) v.weight /= max_count;
  return votes;
}

std::vector<Vote> vote_learned(std::span<const Seed> seeds, const cloudio::PointCloud& pseudo, const UvpmConfig& cfg) {
  if (pseudo.empty()) return {};
  const auto xyz = positions(pseudo);
  const auto picked = micronet::farthest_point_sample(xyz, cfg.learned_points);
  micronet::VoteStackConfig stack_cfg;
  micronet::PointSet input;
  std::vector<double> feats(picked.size() * stack_cfg.in_channels, 0.0);
  std::vector<std::int64_t> row_of(pseudo.size(), -1);
  for (std::size_t r = 0; r < picked.size(); ++r) {
    input.xyz.push_back(xyz[picked[r]]);
    feats[r * stack_cfg.in_channels] = pseudo.points[picked[r]].intensity;
    row_of[picked[r]] = static_cast<std::int64_t>(r);
  }
  input.features = micronet::Tensor::constant({picked.size(), stack_cfg.in_channels}, std::move(feats));
  const micronet::VoteStack stack(stack_cfg, cfg.learned_seed);
  const micronet::Tensor out = stack.forward(input);
  std::vector<Vote> votes;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const std::int64_t r = row_of[seeds[s].pseudo_index];
    if (r < 0) continue;
    const std::size_t o = static_cast<std::size_t>(r) * 4;
    const Vec3 target{seeds[s].xyz.x + out[o], seeds[s].xyz.y + out[o + 1], seeds[s].xyz.z + out[o + 2]};
    votes.push_back({s, target, 1.0 / (1.0 + std::exp(-out[o + 3]))});
  }
  return votes;
}

std::vector<Cluster> cluster_votes(std::span<const Vote> votes, std::size_t k, const UvpmConfig& cfg) {
  if (k < 1) throw InvalidArgumentError("cluster count must be at least 1");
  if (votes.empty()) return {};
  std::vector<Vec3> targets;
  targets.reserve(votes.size());
  for (const auto& v : votes) targets.push_back(v.target);
  const auto seeds = micronet::farthest_point_sample(targets, k);
  std::vector<Cluster> clusters(seeds.size());
  const double r2 = cfg.cluster_radius * cfg.cluster_radius;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    std::size_t best = seeds.size();
    double best_d = r2;
    for (std::size_t c = 0; c < seeds.size(); ++c) {
      const double d = dist2(targets[i], targets[seeds[c]]);
      if (d < best_d || (d == best_d && best == seeds.size())) {
        best = c;
        best_d = d;
      }
    }
    if (best < seeds.size()) clusters[best].members.push_back(i);
  }
  std::vector<Cluster> out;
  for (auto& c : clusters) {
    if (c.members.empty()) continue;
    Vec3 m;
    double w = 0.0;
    for (std::size_t i : c.members) {
      m.x += votes[i].weight * targets[i].x;
      m.y += votes[i].weight * targets[i].y;
      m.z += votes[i].weight * targets[i].z;
      w += votes[i].weight;
    }
    if (w > 0.0) {
      c.center = {m.x / w, m.y / w, m.z / w};
    } else {
      for (std::size_t i : c.members) {
        c.center.x += targets[i].x;
        c.center.y += targets[i].y;
        c.center.z += targets[i].z;
      }
      const double n = static_cast<double>(c.members.size());
      c.center = {c.center.x / n, c.center.y / n, c.center.z / n};
    }
    c.weight = w;
    out.push_back(std::move(c));
  }
  return out;
}

YawSearch search_yaw(std::span<const Vec3> points, int steps) {
  if (steps < 1) throw InvalidArgumentError("yaw_steps must be at least 1");
  YawSearch ys;
  ys.areas.assign(static_cast<std::size_t>(steps), 0.0);
  if (points.empty()) return ys;
  for (int k = 0; k < steps; ++k) {
    const double a = k * std::numbers::pi / steps;
    const double c = std::cos(a), s = std::sin(a);
    double u0 = std::numeric_limits<double>::infinity(), u1 = -u0, v0 = u0, v1 = -u0;
    for (const auto& p : points) {
      const double u = p.x * c + p.y * s;
      const double v = -p.x * s + p.y * c;
      u0 = std::min(u0, u);
      u1 = std::max(u1, u);
      v0 = std::min(v0, v);
      v1 = std::max(v1, v);
    }
    ys.areas[static_cast<std::size_t>(k)] = (u1 - u0) * (v1 - v0);
    if (ys.areas[static_cast<std::size_t>(k)] < ys.areas[static_cast<std::size_t>(ys.best_step)]) ys.best_step = k;
  }
  return ys;
}

geometry::Proposal refine(const Vec3& center, double score, const PointIndex& index, const UvpmConfig& cfg) {
  const Vec3& prior = cfg.prior_scale;
  const double radius = 0.5 * std::hypot(prior.x, prior.y);
  const auto nbr = index.within_radius({center.x, center.y}, radius);
  double cx = center.x, cy = center.y, yaw = 0.0;
  if (nbr.size() >= 3) {
    std::vector<Vec3> pts;
    pts.reserve(nbr.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t k : nbr) {
      pts.push_back(index.points()[k]);
      sx += index.points()[k].x;
      sy += index.points()[k].y;
    }
    const YawSearch ys = search_yaw(pts, cfg.yaw_steps);
    const double a = ys.best_step * std::numbers::pi / cfg.yaw_steps;
    // The box length follows the longer side of the best rectangle.
    const double c = std::cos(a), s = std::sin(a);
    double u0 = std::numeric_limits<double>::infinity(), u1 = -u0, v0 = u0, v1 = -u0;
    for (const auto& p : pts) {
      const double u = p.x * c + p.y * s;
      const double v = -p.x * s + p.y * c;
      u0 = std::min(u0, u);
      u1 = std::max(u1, u);
      v0 = std::min(v0, v);
      v1 = std::max(v1, v);
    }
    yaw = (u1 - u0) >= (v1 - v0) ? a : a + 0.5 * std::numbers::pi;
    cx = sx / static_cast<double>(pts.size());
    cy = sy / static_cast<double>(pts.size());
  }
  cx = std::clamp(cx, cfg.x_min - 0.5 * prior.x, cfg.x_max + 0.5 * prior.x);
  cy = std::clamp(cy, cfg.y_min - 0.5 * prior.y, cfg.y_max + 0.5 * prior.y);
  geometry::Proposal p;
  p.box = Box3D({cx, cy, cfg.anchor_z}, prior, yaw);
  p.score = std::clamp(score, 0.0, 1.0);
  p.class_probs = {1.0};
  return p;
}

ProposeResult propose(const cloudio::PointCloud& cloud, const frontview::FrontViewMap& map,
                      const frontview::ProjectionConfig& proj, const UvpmConfig& cfg) {
  cfg.validate();
  proj.validate();
  ProposeResult res;
  const AnchorGrid grid = build_anchor_grid(cfg);
  res.n_anchors = grid.size();
  if (cloud.empty()) return res;

  const auto dense = filter_anchors(grid, map, proj, cfg);
  res.n_dense = dense.size();
  const PointIndex index = PointIndex::above(cloud, ground_cut(cfg));
  std::vector<Anchor> survivors;
  for (const auto& a : dense) {
    if (expansion_check(a.box, index, cfg)) survivors.push_back(a);
  }
  res.n_survivors = survivors.size();
  if (survivors.empty()) return res;

  if (cfg.mode == Mode::kUpm) {
    double max_d = 0.0;
    for (const auto& a : survivors) max_d = std::max(max_d, a.density);
    for (const auto& a : survivors) {
      auto p = refine(a.box.center, max_d > 0.0 ? a.density / max_d : 0.0, index, cfg);
      p.source_anchor = static_cast<std::int64_t>(a.index);
      res.candidates.push_back(std::move(p));
    }
  } else {
    const auto pseudo = make_pseudo_cloud(survivors);
    const auto seeds = generate_seeds(pseudo, index, cfg);
    res.n_seeds = seeds.size();
    const auto votes = cfg.vote == VoteMode::kLearned ? vote_learned(seeds, pseudo, cfg) : vote(seeds, index, cfg);
    res.n_votes = votes.size();
    const auto clusters = cluster_votes(votes, cfg.k_clusters, cfg);
    res.n_clusters = clusters.size();
    double max_w = 0.0;
    for (const auto& c : clusters) max_w = std::max(max_w, c.weight);
    for (const auto& c : clusters) {
      auto p = refine(c.center, max_w > 0.0 ? c.weight / max_w : 0.0, index, cfg);
      std::size_t lead = c.members.front();
      for (std::size_t i : c.members) {
        if (votes[i].weight > votes[lead].weight) lead = i;
      }
      p.source_anchor = static_cast<std::int64_t>(survivors[seeds[votes[lead].seed].pseudo_index].index);
      res.candidates.push_back(std::move(p));
    }
  }
  res.proposals = geometry::nms(res.candidates, cfg.nms_threshold, cfg.nms_mode);
  return res;
}

geometry::Rect2D project_to_2d(const Box3D& box, const frontview::ProjectionConfig& proj) {
  long rmin = std::numeric_limits<long>::max(), rmax = std::numeric_limits<long>::min();
  long cmin = rmin, cmax = rmax;
  for (const Vec3& c : box.corners()) {
    if (c.x <= 0.0) throw InvalidArgumentError("box extends behind the sensor");
    const auto g = frontview::grid_coord(c, proj);
    rmin = std::min(rmin, g.row);
    rmax = std::max(rmax, g.row);
    cmin = std::min(cmin, g.col);
    cmax = std::max(cmax, g.col);
  }
  geometry::Rect2D r;
  r.center = {0.5 * static_cast<double>(cmin + cmax), 0.5 * static_cast<double>(rmin + rmax)};
  r.width = static_cast<double>(cmax - cmin + 1);
  r.height = static_cast<double>(rmax - rmin + 1);
  r.angle = 0.0;
  return r;
}

}  // namespace anchorvote::uvpm
