#include "anchorvote/render.hpp"

#include <cstdio>

namespace anchorvote::render {

namespace {

struct Canvas {
  const BevView& v;
  double px(double y) const { return (v.y_max - y) * v.pixels_per_meter; }
  double py(double x) const { return (v.x_max - x) * v.pixels_per_meter; }
};

std::string fmt(const char* f, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string polygon(const Canvas& c, const geometry::Box3D& box, const char* stroke) {
  std::string pts;
  for (const auto& p : box.bev_corners()) pts += fmt("%.2f,%.2f ", c.px(p.y), c.py(p.x));
  pts.pop_back();
  return std::string("  <polygon points=\"") + pts + "\" fill=\"none\" stroke=\"" + stroke +
         "\" stroke-width=\"2\"/>\n";
}

}  // namespace

std::string bev_svg(std::span<const cloudio::TruthObject> truths, std::span<const geometry::Proposal> dets,
                    const cloudio::PointCloud* cloud, const BevView& view) {
  const Canvas c{view};
  const double w = (view.y_max - view.y_min) * view.pixels_per_meter;
  const double h = (view.x_max - view.x_min) * view.pixels_per_meter;
  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + fmt("%.0f\" height=\"%.0f", w, h) +
         "\">\n";
  svg += "  <rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (cloud) {
    svg += "  <g fill=\"#999999\">\n";
    for (const auto& p : cloud->points) {
      if (p.x < view.x_min || p.x > view.x_max || p.y < view.y_min || p.y > view.y_max) continue;
      svg += "    <rect x=\"" + fmt("%.1f\" y=\"%.1f", c.px(p.y), c.py(p.x)) + "\" width=\"1\" height=\"1\"/>\n";
    }
    svg += "  </g>\n";
  }
  for (const auto& t : truths) svg += polygon(c, t.box, "green");
  for (const auto& d : dets) svg += polygon(c, d.box, "red");
  svg += "</svg>\n";
  return svg;
}

}  // namespace anchorvote::render
