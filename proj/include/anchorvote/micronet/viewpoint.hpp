#pragma once

#include <array>

namespace anchorvote::micronet {

inline constexpr int kViewpointBins = 16;

// Bin b covers [b, b + 1) * 2pi / 16; the residual is measured from the bin
// centre (b + 0.5) * 2pi / 16.
struct ViewpointCode {
  int bin = 0;
  double residual = 0.0;
};

// Wraps into [0, 2pi).
double wrap_two_pi(double angle);
double bin_center(int bin);
ViewpointCode viewpoint_encode(double yaw);
// Angle in [0, 2pi) (up to rounding of the residual).
double viewpoint_decode(const ViewpointCode& code);

}  // namespace anchorvote::micronet
