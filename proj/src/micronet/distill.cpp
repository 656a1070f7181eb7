#include "anchorvote/micronet/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "anchorvote/error.hpp"
#include "anchorvote/micronet/ops.hpp"

namespace anchorvote::micronet {

void DistillBand::validate() const {
  if (!(lo < hi)) throw InvalidArgumentError("distillation band needs lo < hi");
}

std::optional<double> hardened_target(double teacher, const DistillBand& band) {
  band.validate();
  if (teacher >= band.hi) return 1.0;
  if (teacher <= band.lo) return 0.0;
  return std::nullopt;
}

std::optional<double> distill_loss(double student, double teacher, const DistillBand& band) {
  const auto t = hardened_target(teacher, band);
  if (!t) return std::nullopt;
  const double p = std::clamp(student, kProbClamp, 1.0 - kProbClamp);
  return -(*t * std::log(p) + (1.0 - *t) * std::log(1.0 - p));
}

DistillTerm distill_loss(const Tensor& student, std::span<const double> teacher, const DistillBand& band) {
  if (student.numel() != teacher.size()) throw ShapeMismatchError("distill_loss: one teacher score per student score");
  std::vector<std::int64_t> keep;
  std::vector<double> target;
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    if (const auto t = hardened_target(teacher[i], band)) {
      keep.push_back(static_cast<std::int64_t>(i));
      target.push_back(*t);
    }
  }
  if (keep.empty()) return {Tensor::scalar(0.0), 0};
  const Tensor col = reshape(student, {student.numel(), 1});
  const Tensor picked = clamp(gather_rows(col, keep), kProbClamp, 1.0 - kProbClamp);
  return {binary_cross_entropy(picked, target), keep.size()};
}

std::vector<double> ScriptedTeacher::classify(const frontview::Patch& patch) const {
  const double occ = patch.occupied_fraction();
  return {1.0 / (1.0 + std::exp(-steepness_ * (occ - center_)))};
}

ViewpointPrediction ScriptedTeacher::viewpoint(const frontview::Patch& patch) const {
  // Second moments of the occupied cells give an orientation in [0, pi).
  double n = 0.0, mi = 0.0, mj = 0.0;
  for (int i = 0; i < patch.size; ++i) {
    for (int j = 0; j < patch.size; ++j) {
      if (!patch.mask[static_cast<std::size_t>(i) * patch.size + j]) continue;
      n += 1.0;
      mi += i;
      mj += j;
    }
  }
  double angle = 0.0;
  if (n > 0.0) {
    mi /= n;
    mj /= n;
    double sii = 0.0, sjj = 0.0, sij = 0.0;
    for (int i = 0; i < patch.size; ++i) {
      for (int j = 0; j < patch.size; ++j) {
        if (!patch.mask[static_cast<std::size_t>(i) * patch.size + j]) continue;
        sii += (i - mi) * (i - mi);
        sjj += (j - mj) * (j - mj);
        sij += (i - mi) * (j - mj);
      }
    }
    angle = wrap_two_pi(0.5 * std::atan2(2.0 * sij, sjj - sii));
  }
  const ViewpointCode code = viewpoint_encode(angle);
  ViewpointPrediction out;
  double z = 0.0;
  for (int b = 0; b < kViewpointBins; ++b) {
    int d = std::abs(b - code.bin);
    d = std::min(d, kViewpointBins - d);
    out.prob[static_cast<std::size_t>(b)] = std::exp(-2.0 * d);
    z += out.prob[static_cast<std::size_t>(b)];
    out.residual[static_cast<std::size_t>(b)] = wrap_two_pi(angle - bin_center(b) + std::numbers::pi) - std::numbers::pi;
  }
  for (double& p : out.prob) p /= z;
  return out;
}

}  // namespace anchorvote::micronet
