#include "anchorvote/micronet/viewpoint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "anchorvote/error.hpp"

namespace anchorvote::micronet {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBinWidth = kTwoPi / kViewpointBins;
}  // namespace

double wrap_two_pi(double angle) {
  double w = std::fmod(angle, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

double bin_center(int bin) {
  if (bin < 0 || bin >= kViewpointBins) throw InvalidArgumentError("viewpoint bin out of range");
  return (bin + 0.5) * kBinWidth;
}

ViewpointCode viewpoint_encode(double yaw) {
  const double w = wrap_two_pi(yaw);
  const int bin = std::min(static_cast<int>(std::floor(w / kBinWidth)), kViewpointBins - 1);
  return {bin, w - bin_center(bin)};
}

double viewpoint_decode(const ViewpointCode& code) { return bin_center(code.bin) + code.residual; }

}  // namespace anchorvote::micronet
