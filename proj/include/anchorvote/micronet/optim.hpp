#pragma once

#include <vector>

#include "anchorvote/micronet/tensor.hpp"

namespace anchorvote::micronet {

// Optimizers update every parameter of the set in place from its grad.
// Parameters without a grad (never reached by backward) are left alone.
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(ParameterSet& params);

 private:
  double lr_;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParameterSet& params);

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace anchorvote::micronet
