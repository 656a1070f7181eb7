#include "anchorvote/demo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "anchorvote/error.hpp"
#include "anchorvote/micronet/fusion.hpp"
#include "anchorvote/micronet/ops.hpp"
#include "anchorvote/micronet/optim.hpp"
#include "anchorvote/uvpm.hpp"

namespace anchorvote::demo {

micronet::Tensor map_to_image(const frontview::FrontViewMap& map, int size) {
  const auto patch = frontview::crop_patch(map, {0, 0, map.rows, map.cols}, size);
  std::vector<double> data(patch.values);
  for (std::size_t i = 0; i < patch.mask.size(); ++i) data[i * 3 + frontview::kDistance] /= 40.0;
  const auto s = static_cast<std::size_t>(size);
  return micronet::Tensor::constant({s, s, 3}, std::move(data));
}

geometry::Rect2D rect_from_grid(const frontview::GridRect& g) {
  return {{g.col0 + 0.5 * (g.n_cols - 1), g.row0 + 0.5 * (g.n_rows - 1)},
          static_cast<double>(g.n_cols),
          static_cast<double>(g.n_rows),
          0.0};
}

frontview::GridRect grid_from_rect(const geometry::Rect2D& r) {
  const int n_cols = std::max(1, static_cast<int>(std::lround(r.width)));
  const int n_rows = std::max(1, static_cast<int>(std::lround(r.height)));
  return {static_cast<int>(std::lround(r.center.y - 0.5 * (n_rows - 1))),
          static_cast<int>(std::lround(r.center.x - 0.5 * (n_cols - 1))), n_rows, n_cols};
}

DemoBatch make_batch(const config::RunConfig& rc, const micronet::TeacherOracle& teacher) {
  cloudio::SceneParams sp = rc.scene;
  sp.rng_seed = rc.distill.seed;
  const auto scene = cloudio::generate_scene(sp);
  const auto map = frontview::build_map(scene.cloud, rc.projection);
  const int size = static_cast<int>(rc.distill.input_size);

  DemoBatch batch;
  batch.image = map_to_image(map, size);
  const auto result = uvpm::propose(scene.cloud, map, rc.projection, rc.uvpm);
  for (const auto& p : result.proposals) {
    try {
      batch.map_rects.push_back(grid_from_rect(uvpm::project_to_2d(p.box, rc.projection)));
    } catch (const InvalidArgumentError&) {
    }
  }
  std::mt19937_64 rng(rc.distill.seed);
  std::uniform_int_distribution<int> row(0, map.rows - 1), col(0, map.cols - 1);
  std::uniform_int_distribution<int> h(3, std::max(3, map.rows / 3)), w(3, std::max(3, map.cols / 4));
  for (int i = 0; i < rc.distill.random_proposals; ++i) {
    const int nr = h(rng), nc = w(rng);
    batch.map_rects.push_back({std::min(row(rng), map.rows - nr), std::min(col(rng), map.cols - nc), nr, nc});
  }
  const double sx = static_cast<double>(size) / map.cols;
  const double sy = static_cast<double>(size) / map.rows;
  for (const auto& g : batch.map_rects) {
    batch.teacher.push_back(teacher.classify(frontview::crop_patch(map, g, 16)).at(0));
    const auto r = rect_from_grid(g);
    batch.image_rects.push_back(
        {{(r.center.x + 0.5) * sx - 0.5, (r.center.y + 0.5) * sy - 0.5}, r.width * sx, r.height * sy, 0.0});
  }
  return batch;
}

DemoResult run_distill_demo(const config::RunConfig& rc, const micronet::TeacherOracle& teacher,
                            const std::function<void(int, double)>& on_step) {
  if (rc.distill.steps < 0) throw InvalidArgumentError("distillation steps must be >= 0");
  const DemoBatch batch = make_batch(rc, teacher);
  if (batch.image_rects.empty()) throw InvalidArgumentError("distillation demo has no proposals");
  micronet::FusionConfig fc;
  fc.input_size = rc.distill.input_size;
  micronet::FusionNet net(fc, rc.distill.seed);
  micronet::Adam opt(rc.distill.lr);

  auto evaluate = [&](bool backprop) {
    const auto out = net.forward(batch.image, batch.image_rects);
    const auto term = micronet::distill_loss(net.foreground_prob(out), batch.teacher, rc.distill.band);
    if (backprop) {
      net.parameters().zero_grad();
      micronet::backward(term.loss);
    }
    return term;
  };

  DemoResult res;
  res.proposals = batch.image_rects.size();
  for (int step = 0; step < rc.distill.steps; ++step) {
    const auto term = evaluate(true);
    const double loss = term.loss.item();
    if (!std::isfinite(loss)) throw NumericError("distillation loss is not finite");
    res.used = term.used;
    res.losses.push_back(loss);
    if (on_step) on_step(step, loss);
    opt.step(net.parameters());
  }
  const auto last = evaluate(false);
  res.used = last.used;
  res.final_loss = last.loss.item();
  return res;
}

}  // namespace anchorvote::demo
