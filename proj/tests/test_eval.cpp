#include <random>

#include "anchorvote/error.hpp"
#include "anchorvote/eval.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

using namespace anchorvote;
using namespace anchorvote::eval;
using geometry::Box3D;

namespace {

MatchResult ranked(const std::vector<std::pair<double, bool>>& dets, std::size_t n_truth) {
  MatchResult r;
  for (std::size_t i = 0; i < dets.size(); ++i) r.dets.push_back({i, dets[i].first, dets[i].second, dets[i].second ? 0 : -1});
  r.n_truth = n_truth;
  return r;
}

std::vector<double> samples(Interpolation i) {
  std::vector<double> s;
  if (i == Interpolation::k11) {
    for (int k = 0; k <= 10; ++k) s.push_back(k / 10.0);
  } else {
    for (int k = 1; k <= 40; ++k) s.push_back(k / 40.0);
  }
  return s;
}

cloudio::TruthObject truth(double x, double y, std::optional<cloudio::TruthAnnotation> ann = std::nullopt) {
  return {Box3D({x, y, -1.0}, {3.9, 1.6, 1.56}, 0.0), 0, ann};
}

geometry::Proposal det(double x, double y, double score) {
  geometry::Proposal p;
  p.box = Box3D({x, y, -1.0}, {3.9, 1.6, 1.56}, 0.0);
  p.score = score;
  return p;
}

}  // namespace

TEST_CASE("hand-enumerated four-detection AP") {
  // Ranked TP, FP, TP, TP against four truths: precision 1, 1/2, 2/3, 3/4 at
  // recall 1/4, 1/4, 1/2, 3/4.
  const std::vector<MatchResult> r{ranked({{0.9, true}, {0.8, false}, {0.7, true}, {0.6, true}}, 4)};
  CHECK(average_precision(r, Interpolation::k11) == 6.75 / 11.0);
  CHECK(average_precision(r, Interpolation::k40) == 25.0 / 40.0);
}

TEST_CASE("AP equals exhaustive PR enumeration") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> n_det(0, 20), n_truth(1, 12), coin(0, 1), sc(0, 9);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = n_det(rng);
    const std::size_t nt = static_cast<std::size_t>(n_truth(rng));
    std::vector<std::pair<double, bool>> d;
    std::size_t tps = 0;
    for (int i = 0; i < n; ++i) {
      bool tp = coin(rng) == 1 && tps < nt;
      tps += tp ? 1 : 0;
      d.push_back({sc(rng) / 10.0, tp});
    }
    const std::vector<MatchResult> r{ranked(d, nt)};
    for (auto interp : {Interpolation::k11, Interpolation::k40}) {
      const auto s = samples(interp);
      CHECK(average_precision(r, interp) == doctest::Approx(oracle::exhaustive_ap(d, nt, s)).epsilon(1e-12));
    }
  }
}

TEST_CASE("AP edge cases") {
  const std::vector<MatchResult> none{ranked({}, 0)};
  CHECK_THROWS_AS(average_precision(none, Interpolation::k11), UndefinedApError);
  const std::vector<MatchResult> empty{ranked({}, 3)};
  CHECK(average_precision(empty, Interpolation::k11) == 0.0);
  const std::vector<MatchResult> perfect{ranked({{0.9, true}, {0.8, true}}, 2)};
  CHECK(average_precision(perfect, Interpolation::k11) == 1.0);
  CHECK(average_precision(perfect, Interpolation::k40) == 1.0);
}

TEST_CASE("greedy matching by score") {
  const std::vector<cloudio::TruthObject> truths{truth(20, 0), truth(30, 5)};
  const std::vector<geometry::Proposal> dets{det(20.2, 0, 0.5), det(20.1, 0, 0.9), det(50, 0, 0.7), det(30, 5, 0.1)};
  EvalConfig cfg;
  cfg.iou_threshold = 0.5;
  const auto m = match(dets, truths, cfg);
  REQUIRE(m.dets.size() == 4);
  CHECK(m.dets[0].det == 1);
  CHECK(m.dets[0].tp);
  CHECK(m.dets[1].det == 2);
  CHECK_FALSE(m.dets[1].tp);
  CHECK(m.dets[2].det == 0);
  CHECK_FALSE(m.dets[2].tp);  // duplicate of a matched truth
  CHECK(m.dets[3].tp);
  CHECK(m.n_truth == 2);
}

TEST_CASE("difficulty bins are cumulative") {
  const cloudio::TruthAnnotation easy{50, 0, 0.0}, moderate{30, 1, 0.2}, hard{30, 2, 0.4}, ignored{10, 3, 0.9};
  CHECK(difficulty_bin(truth(0, 0, easy)) == DifficultyBin::kEasy);
  CHECK(difficulty_bin(truth(0, 0, moderate)) == DifficultyBin::kModerate);
  CHECK(difficulty_bin(truth(0, 0, hard)) == DifficultyBin::kHard);
  CHECK(difficulty_bin(truth(0, 0, ignored)) == DifficultyBin::kIgnored);
  CHECK(difficulty_bin(truth(0, 0)) == DifficultyBin::kAll);
  CHECK(counts_at(truth(0, 0, easy), Difficulty::kHard));
  CHECK_FALSE(counts_at(truth(0, 0, hard), Difficulty::kModerate));
  CHECK_FALSE(counts_at(truth(0, 0), Difficulty::kEasy));
  CHECK(counts_at(truth(0, 0), Difficulty::kAll));

  // A detection on a truth outside the level is neither TP nor FP.
  const std::vector<cloudio::TruthObject> truths{truth(20, 0, easy), truth(30, 5, hard)};
  const std::vector<geometry::Proposal> dets{det(20, 0, 0.9), det(30, 5, 0.8)};
  EvalConfig cfg;
  cfg.difficulty = Difficulty::kEasy;
  const auto m = match(dets, truths, cfg);
  CHECK(m.n_truth == 1);
  REQUIRE(m.dets.size() == 1);
  CHECK(m.dets[0].tp);
}

TEST_CASE("report tables") {
  std::vector<Scene> scenes{{"a", {det(20, 0, 0.9)}, {truth(20, 0, cloudio::TruthAnnotation{50, 0, 0.0})}}};
  const std::vector<double> ious{0.5};
  const std::vector<Metric> metrics{Metric::k2d, Metric::kBird, Metric::k3d};
  const std::vector<Difficulty> diffs{Difficulty::kEasy, Difficulty::kAll};
  const auto rep = make_report(scenes, ious, metrics, diffs, Interpolation::k11);
  REQUIRE(rep.rows.size() == 6);
  for (const auto& r : rep.rows) CHECK(*r.ap == 1.0);
  const auto csv = to_csv(rep);
  CHECK(csv.rfind("metric,iou,difficulty,ap\n2d,0.5,easy,1\n", 0) == 0);
  const auto j = nlohmann::json::parse(to_json(rep));
  CHECK(j["rows"].size() == 6);
  CHECK(j["rows"][0]["ap"] == 1.0);

  scenes[0].truths[0].annotation.reset();
  const auto partial = make_report(scenes, ious, metrics, diffs, Interpolation::k11);
  CHECK_FALSE(partial.rows[0].ap);
  CHECK(to_csv(partial).find("2d,0.5,easy,nan") != std::string::npos);
  CHECK(nlohmann::json::parse(to_json(partial))["rows"][0]["ap"].is_null());

  scenes[0].truths.clear();
  CHECK_THROWS_AS(make_report(scenes, ious, metrics, diffs, Interpolation::k11), UndefinedApError);
}

TEST_CASE("published reference rows") {
  const auto rows = published_reference();
  CHECK(rows.size() == 16);
  bool found = false;
  for (const auto& r : rows) {
    if (std::string(r.method) == "UPM+ResNet50+SA4" && r.iou == 0.3 && std::string(r.metric) == "3d") {
      found = true;
      CHECK(r.easy == 75.34);
    }
  }
  CHECK(found);
}

TEST_CASE("metric and difficulty parsing") {
  CHECK(parse_metric("bev") == Metric::kBird);
  CHECK(parse_difficulty("hard") == Difficulty::kHard);
  CHECK_THROWS_AS(parse_metric("4d"), InvalidArgumentError);
  EvalConfig c;
  c.iou_threshold = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgumentError);
}
