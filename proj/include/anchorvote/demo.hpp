#pragma once

#include <functional>
#include <vector>

#include "anchorvote/config.hpp"
#include "anchorvote/frontview.hpp"
#include "anchorvote/geometry.hpp"
#include "anchorvote/micronet/distill.hpp"
#include "anchorvote/micronet/tensor.hpp"

namespace anchorvote::demo {

// Whole map resampled to size x size x 3: height, distance / 40 m and
// intensity; empty cells are 0.
micronet::Tensor map_to_image(const frontview::FrontViewMap& map, int size);

// Axis-aligned conversions between cell rectangles and map-plane Rect2D
// (u = column, v = row, cell centres at integers).
geometry::Rect2D rect_from_grid(const frontview::GridRect& g);
frontview::GridRect grid_from_rect(const geometry::Rect2D& r);

struct DemoBatch {
  micronet::Tensor image;
  std::vector<frontview::GridRect> map_rects;  // proposals on the map
  std::vector<geometry::Rect2D> image_rects;   // the same proposals in image pixels
  std::vector<double> teacher;                 // teacher confidence per proposal
};

// Proposals from UVPM on the synthetic scene plus random rectangles, scored
// by the teacher on 16 x 16 map patches.
DemoBatch make_batch(const config::RunConfig& rc, const micronet::TeacherOracle& teacher);

struct DemoResult {
  std::vector<double> losses;  // loss before each step
  double final_loss = 0.0;     // loss after the last step
  std::size_t used = 0;        // proposals outside the ambiguity band
  std::size_t proposals = 0;
};

// Trains the student with Adam on one batch. `on_step(step, loss)` is called
// before each update. Throws NumericError on a non-finite loss.
DemoResult run_distill_demo(const config::RunConfig& rc, const micronet::TeacherOracle& teacher,
                            const std::function<void(int, double)>& on_step = {});

}  // namespace anchorvote::demo
