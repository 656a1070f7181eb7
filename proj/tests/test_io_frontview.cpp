#include <filesystem>
#include <random>
#include <set>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/error.hpp"
#include "anchorvote/frontview.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace anchorvote;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("anchorvote_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("velodyne bin round trip and malformed length") {
  const auto dir = temp_dir("bin");
  cloudio::PointCloud c;
  c.points = {{1.5, -2.25, 0.5, 0.25}, {10.0, 3.0, -1.0, 1.0}};
  cloudio::write_velodyne_bin(c, dir / "a.bin");
  const auto back = cloudio::read_velodyne_bin(dir / "a.bin");
  CHECK(back.points == c.points);
  CHECK(back.frame_id == "a");
  cloudio::atomic_write(dir / "bad.bin", std::string(17, '\0'));
  CHECK_THROWS_AS(cloudio::read_velodyne_bin(dir / "bad.bin"), MalformedFileError);
  CHECK_THROWS_AS(cloudio::read_velodyne_bin(dir / "missing.bin"), IoError);
}

TEST_CASE("detections and truth round trip exactly") {
  const auto dir = temp_dir("dets");
  geometry::Proposal p;
  p.box = geometry::Box3D({12.345678901234567, -3.25, -0.9}, {3.9, 1.6, 1.56}, 0.123456789);
  p.score = 0.987654321;
  p.class_probs = {0.25, 0.75};
  p.source_anchor = 4711;
  cloudio::write_detections({p}, dir / "d.txt");
  const auto back = cloudio::read_detections(dir / "d.txt");
  REQUIRE(back.size() == 1);
  CHECK(back[0] == p);

  std::vector<cloudio::TruthObject> t(2);
  t[0].box = p.box;
  t[0].annotation = cloudio::TruthAnnotation{55.5, 1, 0.2};
  t[1].box = geometry::Box3D({20, 1, -1}, {4, 1.7, 1.5}, -1.0);
  cloudio::write_truth(t, dir / "t.txt");
  CHECK(cloudio::read_truth(dir / "t.txt") == t);
  cloudio::atomic_write(dir / "wrong.txt", "# something else\n");
  CHECK_THROWS_AS(cloudio::read_truth(dir / "wrong.txt"), SchemaMismatchError);
}

TEST_CASE("synthetic scenes are deterministic and objects get returns") {
  cloudio::SceneParams sp;
  sp.rng_seed = 42;
  const auto a = cloudio::generate_scene(sp);
  CHECK(a == cloudio::generate_scene(sp));
  CHECK(a.truth.size() == 3);
  for (const auto& t : a.truth) {
    std::size_t n = 0;
    for (const auto& p : a.cloud.points) n += geometry::contains(t.box, p.xyz()) ? 1 : 0;
    CHECK(n >= static_cast<std::size_t>(sp.points_per_object));
    REQUIRE(t.annotation);
  }
  sp.rng_seed = 43;
  CHECK_FALSE(a == cloudio::generate_scene(sp));
}

TEST_CASE("projection is invariant to scaling the ray") {
  frontview::ProjectionConfig cfg;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> th(-0.7, 0.7), ph(-0.4, 0.03), r(1.0, 80.0), s(0.01, 100.0);
  for (int i = 0; i < 2000; ++i) {
    const double t = th(rng), p = ph(rng), rr = r(rng), k = s(rng);
    const geometry::Vec3 v{rr * std::cos(p) * std::cos(t), rr * std::cos(p) * std::sin(t), rr * std::sin(p)};
    const auto a = frontview::grid_coord(v, cfg);
    const auto b = frontview::grid_coord({v.x * k, v.y * k, v.z * k}, cfg);
    CHECK(a.row == b.row);
    CHECK(a.col == b.col);
  }
  CHECK_THROWS_AS(frontview::grid_coord({0.0, 0.0, 1.0}, cfg), InvalidArgumentError);
}

TEST_CASE("build_map occupancy equals the brute-force cell set") {
  cloudio::SceneParams sp;
  sp.rng_seed = 42;
  const auto scene = cloudio::generate_scene(sp);
  frontview::ProjectionConfig cfg;
  const auto map = frontview::build_map(scene.cloud, cfg);
  std::set<std::pair<int, int>> cells;
  for (const auto& p : scene.cloud.points) {
    int row = 0, col = 0;
    if (oracle::fv_cell(p.xyz(), cfg, row, col)) cells.insert({row, col});
  }
  std::set<std::pair<int, int>> got;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      if (map.is_occupied(r, c)) got.insert({r, c});
    }
  }
  CHECK(got == cells);
  CHECK(map.occupied_count() == cells.size());
}

TEST_CASE("nearest point wins a shared cell") {
  frontview::ProjectionConfig cfg;
  cloudio::PointCloud c;
  c.points = {{20.0, 0.0, -1.0, 0.9}, {10.0, 0.0, -0.5, 0.1}};
  const auto map = frontview::build_map(c, cfg);
  REQUIRE(map.occupied_count() == 1);
  const auto cell = frontview::project_point({10.0, 0.0, -0.5}, cfg);
  REQUIRE(cell);
  CHECK(map.at(cell->row, cell->col, frontview::kIntensity) == doctest::Approx(0.1));
  CHECK(map.at(cell->row, cell->col, frontview::kDistance) == doctest::Approx(std::hypot(10.0, 0.5)));
}

TEST_CASE("empty cloud gives an empty map") {
  const auto map = frontview::build_map({}, frontview::ProjectionConfig{});
  CHECK(map.occupied_count() == 0);
  CHECK(map.rows > 0);
}

TEST_CASE("crop_patch is a plain crop at native size and counts occupancy") {
  frontview::FrontViewMap map(4, 4);
  map.occupied[1 * 4 + 1] = 1;
  map.occupied[2 * 4 + 2] = 1;
  const auto p = frontview::crop_patch(map, {1, 1, 2, 2}, 2);
  CHECK(p.occupied_fraction() == doctest::Approx(0.5));
  CHECK(frontview::crop_patch(map, {-2, -2, 4, 4}, 4).occupied_fraction() == doctest::Approx(1.0 / 16));
  CHECK_THROWS_AS(frontview::crop_patch(map, {10, 10, 2, 2}, 2), InvalidArgumentError);
}
