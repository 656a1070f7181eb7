#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/frontview.hpp"
#include "anchorvote/geometry.hpp"

namespace anchorvote::eval {

// k2d compares front-view map rectangles of the two boxes.
enum class Metric { k2d, kBird, k3d };
enum class Difficulty { kEasy, kModerate, kHard, kAll };
enum class DifficultyBin { kEasy, kModerate, kHard, kIgnored, kAll };
enum class Interpolation { k11, k40 };

std::string to_string(Metric m);
std::string to_string(Difficulty d);
std::string to_string(DifficultyBin b);
Metric parse_metric(const std::string& s);
Difficulty parse_difficulty(const std::string& s);

struct EvalConfig {
  double iou_threshold = 0.5;
  Metric metric = Metric::kBird;
  Difficulty difficulty = Difficulty::kAll;
  Interpolation interpolation = Interpolation::k11;
  frontview::ProjectionConfig projection;  // used by Metric::k2d

  void validate() const;
};

// KITTI bins: easy = height >= 40 px, occlusion 0, truncation <= 0.15;
// moderate = >= 25 px, occlusion <= 1, <= 0.30; hard = >= 25 px,
// occlusion <= 2, <= 0.50. Returns the easiest bin met, kIgnored if none,
// and kAll for unannotated truths.
DifficultyBin difficulty_bin(const cloudio::TruthObject& truth);

// Whether a truth counts toward an evaluation at `level`. Levels are
// cumulative (a moderate evaluation also counts easy objects); unannotated
// truths count only at kAll.
bool counts_at(const cloudio::TruthObject& truth, Difficulty level);

double box_iou(const geometry::Box3D& a, const geometry::Box3D& b, Metric metric,
               const frontview::ProjectionConfig& proj);

struct DetectionMatch {
  std::size_t det = 0;  // index into the input detections
  double score = 0.0;
  bool tp = false;
  std::int64_t truth = -1;  // matched truth, -1 for false positives
};

struct MatchResult {
  // Detections in evaluation order (descending score, input order on ties).
  // Detections matched to truths outside the difficulty level are dropped.
  std::vector<DetectionMatch> dets;
  std::vector<bool> truth_matched;
  std::size_t n_truth = 0;  // truths that count at this level
};

MatchResult match(std::span<const geometry::Proposal> dets, std::span<const cloudio::TruthObject> truths,
                  const EvalConfig& cfg);

// Precision interpolated as the running max from the right, averaged over the
// recall samples (11-point: 0, 0.1, ..., 1; 40-point: 1/40, ..., 1). Throws
// UndefinedApError when no truths count.
double average_precision(std::span<const MatchResult> results, Interpolation interp);

struct Scene {
  std::string id;
  std::vector<geometry::Proposal> dets;
  std::vector<cloudio::TruthObject> truths;
};

struct ReportRow {
  Metric metric = Metric::kBird;
  double iou = 0.0;
  Difficulty difficulty = Difficulty::kAll;
  std::optional<double> ap;  // nullopt when no truth counts at this level
};

struct PublishedRow {
  const char* method;
  double iou;
  const char* metric;
  double easy;
  double moderate;
  double hard;
};

// Published AP values of comparable methods, quoted for orientation only.
std::span<const PublishedRow> published_reference();

struct Report {
  std::vector<ReportRow> rows;
};

// AP for every metric x threshold x difficulty. Throws UndefinedApError when
// the run contains no truths at all.
Report make_report(std::span<const Scene> scenes, std::span<const double> ious, std::span<const Metric> metrics,
                   std::span<const Difficulty> difficulties, Interpolation interp,
                   const frontview::ProjectionConfig& proj = {});

// Columns: metric,iou,difficulty,ap ("nan" for undefined cells).
std::string to_csv(const Report& report);
std::string to_json(const Report& report);

}  // namespace anchorvote::eval
