#include <cmath>
#include <numbers>
#include <random>

#include "anchorvote/error.hpp"
#include "anchorvote/geometry.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace anchorvote;
using namespace anchorvote::geometry;

namespace {

Box3D random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-2.0, 2.0), size(0.5, 4.0), yaw(-std::numbers::pi, std::numbers::pi);
  return Box3D({pos(rng), pos(rng), pos(rng) * 0.3}, {size(rng), size(rng), size(rng)}, yaw(rng));
}

}  // namespace

TEST_CASE("box corners and containment") {
  const Box3D b({1.0, 2.0, 0.5}, {4.0, 2.0, 1.0}, std::numbers::pi / 2);
  CHECK(contains(b, {1.0, 2.0, 0.5}));
  CHECK(contains(b, {1.0, 3.9, 0.5}));   // long side now along y
  CHECK_FALSE(contains(b, {2.9, 2.0, 0.5}));
  CHECK_FALSE(contains(b, {1.0, 2.0, 1.1}));
  for (const auto& c : b.corners()) {
    const Vec3 in{b.center.x + 0.999 * (c.x - b.center.x), b.center.y + 0.999 * (c.y - b.center.y),
                  b.center.z + 0.999 * (c.z - b.center.z)};
    CHECK(contains(b, in));
  }
  CHECK(b.volume() == doctest::Approx(8.0));
}

TEST_CASE("invalid boxes throw") {
  CHECK_THROWS_AS(Box3D({0, 0, 0}, {0.0, 1.0, 1.0}, 0.0), InvalidArgumentError);
  CHECK_THROWS_AS(Box3D({0, 0, 0}, {1.0, -1.0, 1.0}, 0.0), InvalidArgumentError);
  CHECK_THROWS_AS(Box3D({NAN, 0, 0}, {1.0, 1.0, 1.0}, 0.0), InvalidArgumentError);
}

TEST_CASE("yaw normalisation") {
  CHECK(normalize_yaw(3 * std::numbers::pi) == doctest::Approx(-std::numbers::pi));  // range [-pi, pi)
  CHECK(normalize_yaw(7.0) == doctest::Approx(7.0 - 2 * std::numbers::pi));
  CHECK(normalize_yaw(-std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
}

TEST_CASE("IoU of identical, disjoint and half-shifted boxes") {
  const Box3D a({0, 0, 0}, {2, 2, 2}, 0.3);
  CHECK(iou_3d(a, a) == doctest::Approx(1.0));
  CHECK(iou_bev(a, a) == doctest::Approx(1.0));
  CHECK(iou_3d(a, Box3D({10, 0, 0}, {2, 2, 2}, 0.3)) == 0.0);
  const Box3D p({0, 0, 0}, {2, 2, 2}, 0.0), q({1, 0, 0}, {2, 2, 2}, 0.0);
  CHECK(iou_3d(p, q) == doctest::Approx(1.0 / 3.0));
  CHECK(iou_bev(p, Box3D({0, 0, 5}, {2, 2, 2}, 0.0)) == doctest::Approx(1.0));
  CHECK(iou_3d(p, Box3D({0, 0, 5}, {2, 2, 2}, 0.0)) == 0.0);
}

TEST_CASE("rotated square overlap matches the octagon area") {
  // Unit square and the same square rotated 45 degrees share a regular octagon.
  const Rect2D a{{0, 0}, 1.0, 1.0, 0.0}, b{{0, 0}, 1.0, 1.0, std::numbers::pi / 4};
  const double octagon = 2.0 * (std::sqrt(2.0) - 1.0);
  CHECK(intersection_area(a, b) == doctest::Approx(octagon).epsilon(1e-12));
}

TEST_CASE("3D IoU agrees with Monte-Carlo sampling") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const Box3D a = random_box(rng), b = random_box(rng);
    CHECK(std::abs(iou_3d(a, b) - oracle::mc_iou_3d(a, b, 200000, 100 + i)) <= 0.01);
  }
}

TEST_CASE("NMS equals the quadratic reference") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Proposal> props(30);
    std::vector<double> scores;
    for (auto& p : props) {
      p.box = random_box(rng);
      p.score = std::round(score(rng) * 10.0) / 10.0;  // force ties
      scores.push_back(p.score);
    }
    for (auto mode : {NmsMode::kBev, NmsMode::k3d}) {
      const auto got = nms_indices(props, 0.3, mode);
      const auto want = oracle::nms_reference(
          scores,
          [&](std::size_t i, std::size_t j) {
            return mode == NmsMode::kBev ? iou_bev(props[i].box, props[j].box) : iou_3d(props[i].box, props[j].box);
          },
          0.3);
      CHECK(got == want);
    }
  }
}

TEST_CASE("NMS edge cases") {
  CHECK(nms(std::vector<Proposal>{}, 0.5, NmsMode::kBev).empty());
  std::vector<Proposal> two(2);
  two[0].score = 0.9;
  two[1].score = 0.8;
  CHECK(nms(two, 0.5, NmsMode::kBev).size() == 1);
  CHECK(nms(two, 1.0, NmsMode::kBev).size() == 2);
  CHECK_THROWS_AS(nms(two, 1.5, NmsMode::kBev), InvalidArgumentError);
  CHECK_THROWS_AS(nms(two, 0.5, NmsMode::k2d), InvalidArgumentError);  // 2D needs rectangles
}
