#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "anchorvote/frontview.hpp"
#include "anchorvote/micronet/tensor.hpp"
#include "anchorvote/micronet/viewpoint.hpp"

namespace anchorvote::micronet {

// Teacher confidences inside [lo, hi] are ambiguous and pass no signal.
struct DistillBand {
  double lo = 0.3;
  double hi = 0.7;
  void validate() const;
};

inline constexpr double kProbClamp = 1e-7;

// 1 above the band, 0 below it, nullopt inside it.
std::optional<double> hardened_target(double teacher, const DistillBand& band);

// Scalar form: BCE of the clamped student score against the hardened target.
std::optional<double> distill_loss(double student, double teacher, const DistillBand& band);

struct DistillTerm {
  Tensor loss;       // mean over contributing pairs; a constant 0 when none contribute
  std::size_t used;  // number of contributing pairs
};

// Batch form over student probabilities (n values, any shape).
DistillTerm distill_loss(const Tensor& student, std::span<const double> teacher, const DistillBand& band);

struct ViewpointPrediction {
  std::array<double, kViewpointBins> prob{};
  std::array<double, kViewpointBins> residual{};
};

// Pre-trained classifier whose confidences supervise the student.
class TeacherOracle {
 public:
  virtual ~TeacherOracle() = default;
  // One confidence in [0, 1] per foreground class.
  virtual std::vector<double> classify(const frontview::Patch& patch) const = 0;
  virtual ViewpointPrediction viewpoint(const frontview::Patch& patch) const = 0;
};

// Deterministic stand-in teacher. Confidence is a steep logistic in the
// patch's occupied fraction; the viewpoint follows the principal axis of the
// occupied cells.
class ScriptedTeacher : public TeacherOracle {
 public:
  explicit ScriptedTeacher(double center = 0.35, double steepness = 12.0) : center_(center), steepness_(steepness) {}
  std::vector<double> classify(const frontview::Patch& patch) const override;
  ViewpointPrediction viewpoint(const frontview::Patch& patch) const override;

 private:
  double center_;
  double steepness_;
};

}  // namespace anchorvote::micronet
