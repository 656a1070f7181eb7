#include <random>

#include "anchorvote/error.hpp"
#include "anchorvote/micronet/distill.hpp"
#include "anchorvote/micronet/fusion.hpp"
#include "anchorvote/micronet/layers.hpp"
#include "anchorvote/micronet/ops.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace anchorvote;
using namespace anchorvote::micronet;

namespace {

Tensor toy_image(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> d(size * size * 3);
  for (auto& x : d) x = u(rng);
  return Tensor::constant({size, size, 3}, d);
}

}  // namespace

TEST_CASE("fusion net output shapes") {
  const auto cfg = FusionConfig::toy();
  FusionNet net(cfg, 1);
  const std::vector<geometry::Rect2D> rects{{{8, 8}, 6, 4, 0}, {{4, 10}, 3, 5, 0.2}};
  const auto out = net.forward(toy_image(16, 2), rects);
  CHECK(out.class_logits.shape() == Shape{2, 2});
  CHECK(out.rotation_logits.shape() == Shape{2, 16});
  const auto p = net.foreground_prob(out);
  CHECK(p.shape() == Shape{2, 1});
  CHECK(p[0] > 0.0);
  CHECK(p[0] < 1.0);
  CHECK_THROWS_AS(net.forward(toy_image(8, 2), rects), ShapeMismatchError);
}

TEST_CASE("fusion graph finite-difference gradient") {
  const auto cfg = FusionConfig::toy();
  FusionNet net(cfg, 3);
  const auto image = toy_image(16, 4);
  const std::vector<geometry::Rect2D> rects{{{7.5, 7.5}, 8, 6, 0}, {{5, 9}, 4, 4, 0.3}, {{11, 4}, 5, 3, 0}};
  const std::vector<double> teacher{0.95, 0.1, 0.8};
  std::vector<Tensor> params;
  for (const auto& [name, t] : net.parameters()) params.push_back(t);
  const std::vector<std::size_t> bins{3, 0, 12};
  auto loss = [&] {
    const auto out = net.forward(image, rects, true, 17);
    return add(distill_loss(net.foreground_prob(out), teacher, DistillBand{}).loss,
               cross_entropy_rows(out.rotation_logits, bins));
  };
  CHECK(oracle::max_grad_error(loss, params, 1e-6, 6) <= 1e-4);
  // No branch may be dead at this point, or the check above is vacuous.
  for (const auto& [name, t] : net.parameters()) {
    double norm = 0.0;
    for (double g : t.grad()) norm += g * g;
    CHECK_MESSAGE(norm > 0.0, name);
  }
}

TEST_CASE("fusion config validation") {
  FusionConfig c;
  c.b_widths.back() = 7;
  CHECK_THROWS_AS(c.validate(), InvalidArgumentError);
  c = FusionConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgumentError);
}

TEST_CASE("vote stack shape on a small cloud") {
  VoteStackConfig cfg;
  cfg.in_channels = 5;
  cfg.centers = {32, 16, 8, 4};
  cfg.sa_mlp = {8, 8};
  cfg.fp1_mlp = {8};
  cfg.fp2_mlp = {8};
  VoteStack stack(cfg, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  PointSet in;
  std::vector<double> f(64 * 5);
  for (int i = 0; i < 64; ++i) in.xyz.push_back({u(rng), u(rng), u(rng)});
  for (auto& x : f) x = u(rng);
  in.features = Tensor::constant({64, 5}, f);
  const auto out = stack.forward(in);
  CHECK(out.shape() == Shape{64, 4});
}
