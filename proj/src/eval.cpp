#include "anchorvote/eval.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>

#include "anchorvote/error.hpp"
#include "anchorvote/uvpm.hpp"
#include "json.hpp"

namespace anchorvote::eval {

namespace {

struct Criteria {
  double min_height;
  int max_occlusion;
  double max_truncation;
};

constexpr Criteria kEasy{40.0, 0, 0.15};
constexpr Criteria kModerate{25.0, 1, 0.30};
constexpr Criteria kHard{25.0, 2, 0.50};

bool meets(const cloudio::TruthAnnotation& a, const Criteria& c) {
  return a.height_px >= c.min_height && a.occlusion <= c.max_occlusion && a.truncation <= c.max_truncation;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

constexpr std::array<PublishedRow, 16> kPublished{{
    {"VS3D (Lidar)", 0.3, "2d", 78.64, 74.41, 66.24},
    {"VS3D (Lidar)", 0.3, "3d", 65.96, 59.76, 49.78},
    {"UPM+ResNet50+SA4", 0.3, "2d", 83.02, 78.10, 69.02},
    {"UPM+ResNet50+SA4", 0.3, "bird", 75.04, 66.35, 56.94},
    {"UPM+ResNet50+SA4", 0.3, "3d", 75.34, 65.15, 55.51},
    {"UVPM+ResNet50+SA4", 0.3, "2d", 84.21, 79.65, 70.35},
    {"UVPM+ResNet50+SA4", 0.3, "bird", 76.21, 67.25, 56.32},
    {"UVPM+ResNet50+SA4", 0.3, "3d", 74.04, 64.27, 54.70},
    {"VS3D (Lidar)", 0.5, "2d", 74.54, 66.71, 57.55},
    {"VS3D (Lidar)", 0.5, "3d", 40.32, 37.36, 31.09},
    {"UPM+ResNet50+SA4", 0.5, "2d", 78.24, 72.35, 63.65},
    {"UPM+ResNet50+SA4", 0.5, "bird", 62.25, 53.52, 45.41},
    {"UPM+ResNet50+SA4", 0.5, "3d", 52.82, 43.10, 36.12},
    {"UVPM+ResNet50+SA4", 0.5, "2d", 80.15, 72.66, 64.98},
    {"UVPM+ResNet50+SA4", 0.5, "bird", 64.27, 53.46, 46.98},
    {"UVPM+ResNet50+SA4", 0.5, "3d", 51.24, 44.35, 35.32},
}};

}  // namespace

std::string to_string(Metric m) {
  switch (m) {
    case Metric::k2d: return "2d";
    case Metric::kBird: return "bird";
    case Metric::k3d: return "3d";
  }
  return "?";
}

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "easy";
    case Difficulty::kModerate: return "moderate";
    case Difficulty::kHard: return "hard";
    case Difficulty::kAll: return "all";
  }
  return "?";
}

std::string to_string(DifficultyBin b) {
  switch (b) {
    case DifficultyBin::kEasy: return "easy";
    case DifficultyBin::kModerate: return "moderate";
    case DifficultyBin::kHard: return "hard";
    case DifficultyBin::kIgnored: return "ignored";
    case DifficultyBin::kAll: return "all";
  }
  return "?";
}

Metric parse_metric(const std::string& s) {
  if (s == "2d") return Metric::k2d;
  if (s == "bird" || s == "bev") return Metric::kBird;
  if (s == "3d") return Metric::k3d;
  throw InvalidArgumentError("unknown metric '" + s + "' (expected 2d, bird or 3d)");
}

Difficulty parse_difficulty(const std::string& s) {
  if (s == "easy") return Difficulty::kEasy;
  if (s == "moderate") return Difficulty::kModerate;
  if (s == "hard") return Difficulty::kHard;
  if (s == "all") return Difficulty::kAll;
  throw InvalidArgumentError("unknown difficulty '" + s + "'");
}

void EvalConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw InvalidArgumentError("IoU threshold must lie in (0, 1]");
}

DifficultyBin difficulty_bin(const cloudio::TruthObject& truth) {
  if (!truth.annotation) return DifficultyBin::kAll;
  const auto& a = *truth.annotation;
  if (meets(a, kEasy)) return DifficultyBin::kEasy;
  if (meets(a, kModerate)) return DifficultyBin::kModerate;
  if (meets(a, kHard)) return DifficultyBin::kHard;
  return DifficultyBin::kIgnored;
}

bool counts_at(const cloudio::TruthObject& truth, Difficulty level) {
  if (level == Difficulty::kAll) return true;
  if (!truth.annotation) return false;
  switch (level) {
    case Difficulty::kEasy: return meets(*truth.annotation, kEasy);
    case Difficulty::kModerate: return meets(*truth.annotation, kModerate);
    case Difficulty::kHard: return meets(*truth.annotation, kHard);
    case Difficulty::kAll: return true;
  }
  return false;
}

double box_iou(const geometry::Box3D& a, const geometry::Box3D& b, Metric metric,
               const frontview::ProjectionConfig& proj) {
  switch (metric) {
    case Metric::kBird: return geometry::iou_bev(a, b);
    case Metric::k3d: return geometry::iou_3d(a, b);
    case Metric::k2d:
      try {
        return geometry::iou_2d(uvpm::project_to_2d(a, proj), uvpm::project_to_2d(b, proj));
      } catch (const InvalidArgumentError&) {
        return 0.0;  // a box reaching behind the sensor has no map rectangle
      }
  }
  return 0.0;
}

MatchResult match(std::span<const geometry::Proposal> dets, std::span<const cloudio::TruthObject> truths,
                  const EvalConfig& cfg) {
  cfg.validate();
  MatchResult res;
  res.truth_matched.assign(truths.size(), false);
  std::vector<bool> counted(truths.size());
  for (std::size_t t = 0; t < truths.size(); ++t) {
    counted[t] = counts_at(truths[t], cfg.difficulty);
    res.n_truth += counted[t] ? 1 : 0;
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  for (std::size_t d : order) {
    std::int64_t best = -1;
    double best_iou = -1.0;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (res.truth_matched[t]) continue;
      const double iou = box_iou(dets[d].box, truths[t].box, cfg.metric, cfg.projection);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<std::int64_t>(t);
      }
    }
    if (best >= 0 && best_iou >= cfg.iou_threshold) {
      res.truth_matched[static_cast<std::size_t>(best)] = true;
      if (!counted[static_cast<std::size_t>(best)]) continue;
      res.dets.push_back({d, dets[d].score, true, best});
    } else {
      res.dets.push_back({d, dets[d].score, false, -1});
    }
  }
  return res;
}

double average_precision(std::span<const MatchResult> results, Interpolation interp) {
  std::size_t n_truth = 0;
  struct Entry {
    double score;
    bool tp;
  };
  std::vector<Entry> all;
  for (const auto& r : results) {
    n_truth += r.n_truth;
    for (const auto& d : r.dets) all.push_back({d.score, d.tp});
  }
  if (n_truth == 0) throw UndefinedApError("average precision is undefined without ground-truth objects");
  std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score > b.score; });

  std::vector<double> precision(all.size());
  std::vector<double> recall(all.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    tp += all[i].tp ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_truth);
  }
  for (std::size_t i = all.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  std::vector<double> samples;
  if (interp == Interpolation::k11) {
    for (int k = 0; k <= 10; ++k) samples.push_back(k / 10.0);
  } else {
    for (int k = 1; k <= 40; ++k) samples.push_back(k / 40.0);
  }
  double sum = 0.0;
  std::size_t i = 0;
  for (double r : samples) {
    // Recall is non-decreasing, so the first index reaching r carries the
    // running max over everything to its right.
    while (i < all.size() && recall[i] < r) ++i;
    if (i < all.size()) sum += precision[i];
  }
  return sum / static_cast<double>(samples.size());
}

std::span<const PublishedRow> published_reference() { return kPublished; }

Report make_report(std::span<const Scene> scenes, std::span<const double> ious, std::span<const Metric> metrics,
                   std::span<const Difficulty> difficulties, Interpolation interp,
                   const frontview::ProjectionConfig& proj) {
  std::size_t total_truths = 0;
  for (const auto& s : scenes) total_truths += s.truths.size();
  if (total_truths == 0) throw UndefinedApError("no ground-truth objects in the run; average precision is undefined");
  Report rep;
  for (Metric m : metrics) {
    for (double iou : ious) {
      for (Difficulty d : difficulties) {
        EvalConfig cfg;
        cfg.iou_threshold = iou;
        cfg.metric = m;
        cfg.difficulty = d;
        cfg.interpolation = interp;
        cfg.projection = proj;
        std::vector<MatchResult> results;
        for (const auto& s : scenes) results.push_back(match(s.dets, s.truths, cfg));
        ReportRow row{m, iou, d, std::nullopt};
        try {
          row.ap = average_precision(results, interp);
        } catch (const UndefinedApError&) {
        }
        rep.rows.push_back(row);
      }
    }
  }
  return rep;
}

std::string to_csv(const Report& report) {
  std::string out = "metric,iou,difficulty,ap\n";
  for (const auto& r : report.rows) {
    out += to_string(r.metric) + "," + format_double(r.iou) + "," + to_string(r.difficulty) + "," +
           (r.ap ? format_double(*r.ap) : std::string("nan")) + "\n";
  }
  return out;
}

std::string to_json(const Report& report) {
  nlohmann::ordered_json j;
  j["columns"] = {"metric", "iou", "difficulty", "ap"};
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["metric"] = to_string(r.metric);
    row["iou"] = r.iou;
    row["difficulty"] = to_string(r.difficulty);
    row["ap"] = r.ap ? nlohmann::ordered_json(*r.ap) : nlohmann::ordered_json(nullptr);
    rows.push_back(row);
  }
  j["rows"] = rows;
  auto ref = nlohmann::ordered_json::array();
  for (const auto& p : published_reference()) {
    ref.push_back({{"method", p.method},
                   {"input", "lidar"},
                   {"iou", p.iou},
                   {"metric", p.metric},
                   {"easy", p.easy},
                   {"moderate", p.moderate},
                   {"hard", p.hard}});
  }
  j["published_reference (not reproduced)"] = ref;
  return j.dump(2) + "\n";
}

}  // namespace anchorvote::eval
