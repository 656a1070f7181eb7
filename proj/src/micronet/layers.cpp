#include "anchorvote/micronet/layers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "anchorvote/error.hpp"
#include "anchorvote/micronet/ops.hpp"

namespace anchorvote::micronet {

namespace {

double dist2(const geometry::Vec3& a, const geometry::Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng)
    : weight(normal_parameter({in, out}, std::sqrt(2.0 / static_cast<double>(in)), rng)),
      bias(Tensor::parameter({out}, std::vector<double>(out, 0.0))) {}

Tensor Linear::forward(const Tensor& x) const { return add_row_bias(matmul(x, weight), bias); }

void Linear::register_into(ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + ".weight", weight);
  set.add(prefix + ".bias", bias);
}

Mlp::Mlp(std::size_t in, std::span<const std::size_t> widths, std::mt19937_64& rng, bool relu_last_layer)
    : relu_last(relu_last_layer) {
  if (widths.empty()) throw InvalidArgumentError("MLP needs at least one layer width");
  for (std::size_t w : widths) {
    layers.emplace_back(in, w, rng);
    in = w;
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (relu_last || i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

void Mlp::register_into(ParameterSet& set, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].register_into(set, prefix + "." + std::to_string(i));
}

std::vector<std::size_t> farthest_point_sample(std::span<const geometry::Vec3> points, std::size_t m) {
  const std::size_t n = points.size();
  m = std::min(m, n);
  std::vector<std::size_t> picked;
  if (m == 0) return picked;
  picked.reserve(m);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t cur = 0;
  for (std::size_t k = 0; k < m; ++k) {
    picked.push_back(cur);
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], dist2(points[i], points[cur]));
      if (best[i] > far) {
        far = best[i];
        next = i;
      }
    }
    cur = next;
  }
  return picked;
}

std::vector<std::int64_t> ball_query(std::span<const geometry::Vec3> points, std::span<const geometry::Vec3> centers,
                                     double radius, std::size_t nsample) {
  std::vector<std::int64_t> out(centers.size() * nsample, -1);
  const double r2 = radius * radius;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    std::size_t found = 0;
    for (std::size_t i = 0; i < points.size() && found < nsample; ++i) {
      if (dist2(points[i], centers[c]) <= r2) out[c * nsample + found++] = static_cast<std::int64_t>(i);
    }
    for (std::size_t k = found; found > 0 && k < nsample; ++k) out[c * nsample + k] = out[c * nsample];
  }
  return out;
}

SetAbstraction::SetAbstraction(std::size_t n_centers, double radius, std::size_t nsample, std::size_t in_channels,
                               std::span<const std::size_t> widths, std::mt19937_64& rng)
    : n_centers_(n_centers), radius_(radius), nsample_(nsample), in_channels_(in_channels),
      mlp_(3 + in_channels, widths, rng) {
  if (n_centers == 0 || nsample == 0 || !(radius > 0.0)) {
    throw InvalidArgumentError("set abstraction needs centers, samples and a positive radius");
  }
}

PointSet SetAbstraction::forward(const PointSet& input) const {
  const std::size_t n = input.xyz.size();
  if (n == 0) throw InvalidArgumentError("set abstraction on an empty point set");
  if (in_channels_ > 0 && (!input.features.defined() || input.features.rank() != 2 ||
                           input.features.dim(0) != n || input.features.dim(1) != in_channels_)) {
    throw ShapeMismatchError("set abstraction input features must be n x " + std::to_string(in_channels_));
  }
  PointSet out;
  for (std::size_t i : farthest_point_sample(input.xyz, n_centers_)) out.xyz.push_back(input.xyz[i]);
  const std::size_t m = out.xyz.size();
  const auto groups = ball_query(input.xyz, out.xyz, radius_, nsample_);

  std::vector<double> rel(m * nsample_ * 3);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t k = 0; k < nsample_; ++k) {
      const auto& p = input.xyz[static_cast<std::size_t>(groups[c * nsample_ + k])];
      const std::size_t row = c * nsample_ + k;
      rel[row * 3 + 0] = p.x - out.xyz[c].x;
      rel[row * 3 + 1] = p.y - out.xyz[c].y;
      rel[row * 3 + 2] = p.z - out.xyz[c].z;
    }
  }
  Tensor grouped = Tensor::constant({m * nsample_, 3}, std::move(rel));
  if (in_channels_ > 0) grouped = concat_cols({grouped, gather_rows(input.features, groups)});
  out.features = group_max(mlp_.forward(grouped), nsample_);
  return out;
}

void SetAbstraction::register_into(ParameterSet& set, const std::string& prefix) const {
  mlp_.register_into(set, prefix + ".mlp");
}

FeaturePropagation::FeaturePropagation(std::size_t coarse_channels, std::size_t skip_channels,
                                       std::span<const std::size_t> widths, std::mt19937_64& rng)
    : coarse_channels_(coarse_channels), skip_channels_(skip_channels),
      mlp_(coarse_channels + skip_channels, widths, rng) {}

Tensor FeaturePropagation::interpolate(const PointSet& coarse, std::span<const geometry::Vec3> fine_xyz) {
  if (coarse.xyz.empty()) throw InvalidArgumentError("feature propagation from an empty point set");
  constexpr std::size_t kNear = 3;
  std::vector<std::int64_t> idx(fine_xyz.size() * kNear, -1);
  std::vector<double> w(fine_xyz.size() * kNear, 0.0);
  for (std::size_t i = 0; i < fine_xyz.size(); ++i) {
    std::array<std::pair<double, std::size_t>, kNear> near;
    near.fill({std::numeric_limits<double>::infinity(), 0});
    std::size_t found = 0;
    for (std::size_t j = 0; j < coarse.xyz.size(); ++j) {
      const std::pair<double, std::size_t> cand{dist2(fine_xyz[i], coarse.xyz[j]), j};
      if (found < kNear) {
        near[found++] = cand;
      } else if (cand < near[kNear - 1]) {
        near[kNear - 1] = cand;
      } else {
        continue;
      }
      std::sort(near.begin(), near.begin() + static_cast<long>(found));
    }
    if (near[0].first == 0.0) {
      idx[i * kNear] = static_cast<std::int64_t>(near[0].second);
      w[i * kNear] = 1.0;
      continue;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < found; ++k) total += 1.0 / std::sqrt(near[k].first);
    for (std::size_t k = 0; k < found; ++k) {
      idx[i * kNear + k] = static_cast<std::int64_t>(near[k].second);
      w[i * kNear + k] = (1.0 / std::sqrt(near[k].first)) / total;
    }
  }
  return weighted_gather(coarse.features, idx, w, kNear);
}

Tensor FeaturePropagation::forward(const PointSet& coarse, const PointSet& fine) const {
  Tensor h = interpolate(coarse, fine.xyz);
  if (h.dim(1) != coarse_channels_) throw ShapeMismatchError("feature propagation: coarse channel count mismatch");
  if (skip_channels_ > 0) {
    if (!fine.features.defined() || fine.features.dim(1) != skip_channels_) {
      throw ShapeMismatchError("feature propagation: skip channel count mismatch");
    }
    h = concat_cols({h, fine.features});
  }
  return mlp_.forward(h);
}

void FeaturePropagation::register_into(ParameterSet& set, const std::string& prefix) const {
  mlp_.register_into(set, prefix + ".mlp");
}

VoteStack::VoteStack(const VoteStackConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  const std::size_t levels = cfg.centers.size();
  if (levels < 2 || cfg.radii.size() != levels || cfg.nsample.size() != levels) {
    throw InvalidArgumentError("vote stack needs matching centers/radii/nsample lists of length >= 2");
  }
  std::mt19937_64 rng(seed);
  std::size_t ch = cfg.in_channels;
  for (std::size_t i = 0; i < levels; ++i) {
    sa_.emplace_back(cfg.centers[i], cfg.radii[i], cfg.nsample[i], ch, cfg.sa_mlp, rng);
    ch = sa_.back().out_channels();
  }
  const std::size_t sa2_channels = sa_[1].out_channels();
  fp1_ = FeaturePropagation(ch, sa2_channels, cfg.fp1_mlp, rng);
  fp2_ = FeaturePropagation(fp1_.out_channels(), cfg.in_channels, cfg.fp2_mlp, rng);
  head_ = Linear(fp2_.out_channels(), cfg.vote_outputs, rng);
  for (std::size_t i = 0; i < levels; ++i) sa_[i].register_into(params_, "sa" + std::to_string(i + 1));
  fp1_.register_into(params_, "fp1");
  fp2_.register_into(params_, "fp2");
  head_.register_into(params_, "vote_head");
}

Tensor VoteStack::forward(const PointSet& input) const {
  std::vector<PointSet> levels;
  levels.reserve(sa_.size());
  const PointSet* prev = &input;
  for (const auto& sa : sa_) {
    levels.push_back(sa.forward(*prev));
    prev = &levels.back();
  }
  PointSet mid{levels[1].xyz, fp1_.forward(levels.back(), levels[1])};
  const Tensor fine = fp2_.forward(mid, input);
  return head_.forward(fine);
}

}  // namespace anchorvote::micronet
