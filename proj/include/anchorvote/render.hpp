#pragma once

#include <span>
#include <string>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/geometry.hpp"

namespace anchorvote::render {

struct BevView {
  double x_min = 0.0;
  double x_max = 70.0;
  double y_min = -35.0;
  double y_max = 35.0;
  double pixels_per_meter = 10.0;
};

// SVG 1.1 bird's-eye view: x forward points up the page, y left points left.
// Truth footprints green, detections red, optional cloud points grey.
std::string bev_svg(std::span<const cloudio::TruthObject> truths, std::span<const geometry::Proposal> dets,
                    const cloudio::PointCloud* cloud = nullptr, const BevView& view = {});

}  // namespace anchorvote::render
