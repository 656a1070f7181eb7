#include "anchorvote/micronet/optim.hpp"

#include <cmath>

namespace anchorvote::micronet {

void Sgd::step(ParameterSet& params) {
  for (auto& [name, t] : params) {
    const auto g = t.grad();
    if (g.size() != t.numel()) continue;
    auto d = t.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= lr_ * g[i];
  }
}

void Adam::step(ParameterSet& params) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const auto& e : params) {
      m_.emplace_back(e.second.numel(), 0.0);
      v_.emplace_back(e.second.numel(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::size_t k = 0;
  for (auto& [name, t] : params) {
    const auto g = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    ++k;
    if (g.size() != t.numel()) continue;
    auto d = t.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      d[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

}  // namespace anchorvote::micronet
