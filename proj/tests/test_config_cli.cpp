#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "anchorvote/app.hpp"
#include "anchorvote/cloudio.hpp"
#include "anchorvote/config.hpp"
#include "anchorvote/error.hpp"
#include "anchorvote/frontview.hpp"
#include "anchorvote/uvpm.hpp"
#include "doctest.h"

using namespace anchorvote;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("anchorvote_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code = 0;
  std::string output;
};

Run cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ANCHORVOTE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = cloudio::read_text(log);
  return r;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto rc = config::parse_run_config(
      "# comment\n"
      "seed = 9   # trailing\n"
      "uvpm.delta = 0.5\n"
      "uvpm.mode = upm\n"
      "eval.iou = 0.3, 0.7\n"
      "eval.metrics = bird,3d\n"
      "eval.interpolation = 40\n"
      "projection.delta_theta_deg = 0.2\n");
  CHECK(rc.scene.rng_seed == 9);
  CHECK(rc.uvpm.delta == 0.5);
  CHECK(rc.uvpm.mode == uvpm::Mode::kUpm);
  CHECK(rc.ious == std::vector<double>{0.3, 0.7});
  CHECK(rc.metrics.size() == 2);
  CHECK(rc.interpolation == eval::Interpolation::k40);
  CHECK(rc.projection.delta_theta == doctest::Approx(0.2 * frontview::kDegree));
  CHECK(config::parse_run_config("").scene.rng_seed == 42);
  CHECK_THROWS_AS(config::parse_run_config("bogus = 1\n"), InvalidArgumentError);
  CHECK_THROWS_AS(config::parse_run_config("seed = 1\nseed = 2\n"), InvalidArgumentError);
  CHECK_THROWS_AS(config::parse_run_config("uvpm.delta = abc\n"), InvalidArgumentError);
  CHECK_THROWS_AS(config::parse_run_config("uvpm.delta = -1\n"), InvalidArgumentError);
  CHECK_THROWS_AS(config::parse_run_config("no equals sign\n"), InvalidArgumentError);
  CHECK_THROWS_AS(config::load_run_config("/nonexistent/run.cfg"), IoError);
}

TEST_CASE("cli project reports the oracle occupancy") {
  const auto dir = fresh_dir("project");
  const auto r = cli("project --seed 42 --out " + (dir / "out").string(), dir / "log.txt");
  REQUIRE(r.code == 0);
  cloudio::SceneParams sp;
  sp.rng_seed = 42;
  const auto map = frontview::build_map(cloudio::generate_scene(sp).cloud, frontview::ProjectionConfig{});
  CHECK(r.output.find("synthetic_42 occupied=" + std::to_string(map.occupied_count())) != std::string::npos);
  CHECK(fs::exists(dir / "out" / "synthetic_42_height.pgm"));

  cloudio::write_velodyne_bin({}, dir / "empty.bin");
  const auto e = cli("project --input " + (dir / "empty.bin").string() + " --out " + (dir / "e").string(), dir / "log2.txt");
  CHECK(e.code == 0);
  CHECK(e.output.find("empty occupied=0") != std::string::npos);

  const auto missing = cli("project --input " + (dir / "nope.bin").string(), dir / "log3.txt");
  CHECK(missing.code != 0);
  CHECK(missing.output.find((dir / "nope.bin").string()) != std::string::npos);
}

TEST_CASE("cli propose is deterministic and matches the library") {
  const auto dir = fresh_dir("propose");
  REQUIRE(cli("propose --seed 42 --out " + (dir / "a").string(), dir / "l1.txt").code == 0);
  REQUIRE(cli("propose --seed 42 --out " + (dir / "b").string(), dir / "l2.txt").code == 0);
  const auto a = cloudio::read_text(dir / "a" / "synthetic_42.dets.txt");
  CHECK(a == cloudio::read_text(dir / "b" / "synthetic_42.dets.txt"));

  cloudio::SceneParams sp;
  sp.rng_seed = 42;
  const auto scene = cloudio::generate_scene(sp);
  const frontview::ProjectionConfig proj;
  const auto res = uvpm::propose(scene.cloud, frontview::build_map(scene.cloud, proj), proj, uvpm::UvpmConfig{});
  CHECK(cloudio::read_detections(dir / "a" / "synthetic_42.dets.txt").size() == res.proposals.size());

  REQUIRE(cli("propose --seed 42 --set uvpm.delta=1.000000001 --out " + (dir / "d").string(), dir / "l3.txt").code == 0);
  CHECK(cloudio::read_detections(dir / "d" / "synthetic_42.dets.txt").empty());

  REQUIRE(cli("propose --seed 42 --mode upm --out " + (dir / "u").string(), dir / "l4.txt").code == 0);
  CHECK(cloudio::read_detections(dir / "u" / "synthetic_42.dets.txt").size() > res.proposals.size());
  CHECK(cli("propose --mode bogus", dir / "l5.txt").code != 0);
}

TEST_CASE("cli evaluate: perfect run, undefined AP and mismatched ids") {
  const auto dir = fresh_dir("evaluate");
  cloudio::SceneParams sp;
  sp.rng_seed = 5;
  const auto truth = cloudio::generate_scene(sp).truth;
  std::vector<geometry::Proposal> perfect;
  for (const auto& t : truth) perfect.push_back({t.box, 0.9, {1.0}, -1});
  cloudio::write_detections(perfect, dir / "s.dets.txt");
  cloudio::write_truth(truth, dir / "s.truth.txt");
  const auto r = cli("evaluate --dets " + dir.string() + " --out " + (dir / "out").string(), dir / "log.txt");
  REQUIRE(r.code == 0);
  std::istringstream csv(cloudio::read_text(dir / "out" / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "metric,iou,difficulty,ap");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const bool one = line.ends_with(",1"), undefined = line.ends_with(",nan");
    CHECK((one || undefined));
  }
  CHECK(rows == 24);
  CHECK(fs::exists(dir / "out" / "metrics.json"));
  const auto svg = cloudio::read_text(dir / "out" / "s.bev.svg");
  CHECK(svg.find("<svg") != std::string::npos);

  const auto nt = fresh_dir("evaluate_nt");
  cloudio::write_detections(perfect, nt / "s.dets.txt");
  cloudio::write_truth({}, nt / "s.truth.txt");
  const auto u = cli("evaluate --dets " + nt.string() + " --out " + (nt / "out").string(), nt / "log.txt");
  CHECK(u.code == 3);
  CHECK(u.output.find("undefined") != std::string::npos);

  cloudio::write_detections(perfect, nt / "other.dets.txt");
  cloudio::write_truth(truth, nt / "s.truth.txt");
  const auto m = cli("evaluate --dets " + nt.string() + " --out " + (nt / "out").string(), nt / "log2.txt");
  CHECK(m.code == 1);
  CHECK(m.output.find("mismatched") != std::string::npos);
}

TEST_CASE("cli distill-demo with zero learning rate keeps the loss flat") {
  const auto dir = fresh_dir("distill");
  const auto r = cli("distill-demo --steps 3 --lr 0 --out " + dir.string(), dir / "log.txt");
  REQUIRE(r.code == 0);
  std::istringstream csv(cloudio::read_text(dir / "loss.csv"));
  std::string line;
  std::getline(csv, line);
  std::set<std::string> values;
  while (std::getline(csv, line)) values.insert(line.substr(line.find(',') + 1));
  CHECK(values.size() == 1);
}

TEST_CASE("cli render writes PGMs and an SVG") {
  const auto dir = fresh_dir("render");
  REQUIRE(cli("render --seed 42 --out " + dir.string(), dir / "log.txt").code == 0);
  CHECK(fs::exists(dir / "synthetic_42_distance.pgm"));
  const auto svg = cloudio::read_text(dir / "synthetic_42.bev.svg");
  CHECK(svg.find("#999999") != std::string::npos);
  CHECK(svg.find("green") != std::string::npos);
}

TEST_CASE("app layer loads a directory of scans") {
  const auto dir = fresh_dir("scans");
  cloudio::SceneParams sp;
  sp.rng_seed = 3;
  const auto s = cloudio::generate_scene(sp);
  cloudio::write_velodyne_bin(s.cloud, dir / "b.bin");
  cloudio::write_velodyne_bin({}, dir / "a.bin");
  cloudio::write_truth(s.truth, dir / "b.truth.txt");
  config::RunConfig rc;
  rc.input = dir.string();
  const auto scans = app::load_scans(rc);
  REQUIRE(scans.size() == 2);
  CHECK(scans[0].id == "a");
  CHECK_FALSE(scans[0].truth);
  CHECK(scans[1].truth->size() == s.truth.size());
}
