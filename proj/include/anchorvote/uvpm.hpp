#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/frontview.hpp"
#include "anchorvote/geometry.hpp"

namespace anchorvote::uvpm {

enum class Mode { kUvpm, kUpm };            // kUpm: survivors go straight to refine
enum class VoteMode { kGeometric, kLearned };

struct UvpmConfig {
  // Anchor grid on the ground plane, vehicle frame (x forward, y left).
  double spacing = 0.2;
  double x_min = 0.0;
  double x_max = 70.0;
  double y_min = -35.0;
  double y_max = 35.0;
  geometry::Vec3 prior_scale{3.9, 1.6, 1.56};
  double anchor_z = -1.0;  // template box centre height

  double delta = 0.3;        // density threshold
  int patch_size = 16;       // density patch side S
  double epsilon = 0.1;      // expansion factor
  int shell_tolerance = 5;   // max extra points in the expansion shell
  // Points lower than the template bottom plus this margin count as ground.
  double ground_clearance = 0.1;

  std::size_t n_seeds = 256;     // M
  std::size_t k_clusters = 32;   // K
  double vote_radius = 2.5;      // rho, BEV radius of a seed's neighbourhood
  int min_vote_points = 5;
  double cluster_radius = 1.5;
  int yaw_steps = 32;

  double nms_threshold = 0.1;
  geometry::NmsMode nms_mode = geometry::NmsMode::kBev;

  Mode mode = Mode::kUvpm;
  VoteMode vote = VoteMode::kGeometric;
  std::uint64_t learned_seed = 0;  // weight init of the learned vote stack
  std::size_t learned_points = 2048;

  void validate() const;
};

// Regular grid of anchor centres, half-open: x_min + i * spacing < x_max.
struct AnchorGrid {
  double spacing = 0.0;
  double x_min = 0.0;
  double y_min = 0.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  geometry::Vec3 scale;
  double z = 0.0;

  std::size_t size() const { return nx * ny; }
  // Anchor i lies at column i / ny (x) and row i % ny (y).
  geometry::Vec3 center(std::size_t i) const;
  geometry::Box3D box(std::size_t i) const;
};

AnchorGrid build_anchor_grid(const UvpmConfig& cfg);

// Bounding cell rectangle of the 8 projected corners. nullopt when a corner
// lies behind the sensor or the rectangle misses the map entirely.
std::optional<frontview::GridRect> box_grid_rect(const geometry::Box3D& box, const frontview::ProjectionConfig& proj,
                                                 const frontview::FrontViewMap& map);

// Occupied fraction of the anchor's S x S front-view patch, or nullopt when
// the anchor has no in-range projection.
std::optional<double> density(const geometry::Box3D& anchor, const frontview::FrontViewMap& map,
                              const frontview::ProjectionConfig& proj, int patch_size);

struct Anchor {
  std::size_t index = 0;
  geometry::Box3D box;
  double density = 0.0;
};

// Anchors whose density is defined and >= delta, in grid order.
std::vector<Anchor> filter_anchors(const AnchorGrid& grid, const frontview::FrontViewMap& map,
                                   const frontview::ProjectionConfig& proj, const UvpmConfig& cfg);

// Above-ground points bucketed on a BEV grid for box and radius queries.
class PointIndex {
 public:
  explicit PointIndex(std::vector<geometry::Vec3> points, double cell = 1.0);
  // Keeps points with z >= min_z.
  static PointIndex above(const cloudio::PointCloud& cloud, double min_z, double cell = 1.0);

  std::size_t size() const { return points_.size(); }
  const std::vector<geometry::Vec3>& points() const { return points_; }
  std::size_t count_in_box(const geometry::Box3D& box) const;
  // Indices of points whose BEV distance to `c` is <= radius, ascending.
  std::vector<std::size_t> within_radius(const geometry::Vec2& c, double radius) const;

 private:
  template <typename F>
  void visit(double x0, double y0, double x1, double y1, F&& f) const;

  std::vector<geometry::Vec3> points_;
  double cell_ = 1.0;
  double ox_ = 0.0;
  double oy_ = 0.0;
  long nx_ = 0;
  long ny_ = 0;
  std::vector<std::vector<std::size_t>> buckets_;
};

// Minimum height of points that take part in expansion checks, voting and refinement.
double ground_cut(const UvpmConfig& cfg);

// Shell test: points in the box scaled by (1 + epsilon) minus points in the
// box itself must not exceed shell_tolerance.
bool expansion_check(const geometry::Box3D& anchor, const PointIndex& index, const UvpmConfig& cfg);
bool expansion_check(const geometry::Box3D& anchor, const cloudio::PointCloud& cloud, const UvpmConfig& cfg);

// One point per anchor at its centre, intensity = density.
cloudio::PointCloud make_pseudo_cloud(std::span<const Anchor> survivors);

struct Seed {
  std::size_t pseudo_index = 0;
  geometry::Vec3 xyz;
  // Geometric mode: point count, centroid offset (3), covariance eigenvalues
  // (3, descending) of the real points within vote_radius.
  std::vector<double> feature;
};

std::vector<Seed> generate_seeds(const cloudio::PointCloud& pseudo, const PointIndex& index, const UvpmConfig& cfg);

struct Vote {
  std::size_t seed = 0;
  geometry::Vec3 target;
  double weight = 0.0;
};

// Geometric voting: a seed with at least min_vote_points real points within
// vote_radius (BEV) votes for their centroid, weighted by count / max count.
std::vector<Vote> vote(std::span<const Seed> seeds, const PointIndex& index, const UvpmConfig& cfg);

// Learned voting: the set-abstraction stack runs on up to learned_points
// pseudo points; row i's first three outputs offset seed i and the fourth
// gives its weight through a sigmoid.
std::vector<Vote> vote_learned(std::span<const Seed> seeds, const cloudio::PointCloud& pseudo, const UvpmConfig& cfg);

struct Cluster {
  geometry::Vec3 center;
  double weight = 0.0;
  std::vector<std::size_t> members;  // vote indices
};

std::vector<Cluster> cluster_votes(std::span<const Vote> votes, std::size_t k, const UvpmConfig& cfg);

struct YawSearch {
  int best_step = 0;
  std::vector<double> areas;  // BEV bounding-rectangle area per candidate k * pi / steps
};

YawSearch search_yaw(std::span<const geometry::Vec3> points, int steps);

// Box of prior size around `center`, oriented by the yaw search over the
// nearby points and re-centred on their centroid.
geometry::Proposal refine(const geometry::Vec3& center, double score, const PointIndex& index, const UvpmConfig& cfg);

struct ProposeResult {
  std::vector<geometry::Proposal> proposals;   // after NMS
  std::vector<geometry::Proposal> candidates;  // before NMS
  std::size_t n_anchors = 0;
  std::size_t n_dense = 0;
  std::size_t n_survivors = 0;
  std::size_t n_seeds = 0;
  std::size_t n_votes = 0;
  std::size_t n_clusters = 0;
};

ProposeResult propose(const cloudio::PointCloud& cloud, const frontview::FrontViewMap& map,
                      const frontview::ProjectionConfig& proj, const UvpmConfig& cfg);

// Map-plane rectangle (u = column, v = row) covering the cells of the 8
// projected corners. Throws InvalidArgumentError for boxes behind the sensor.
geometry::Rect2D project_to_2d(const geometry::Box3D& box, const frontview::ProjectionConfig& proj);

}  // namespace anchorvote::uvpm
