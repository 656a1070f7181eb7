#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "anchorvote/geometry.hpp"
#include "anchorvote/micronet/tensor.hpp"

namespace anchorvote::micronet {

// y = x W + b. W: in x out.
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng);
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor forward(const Tensor& x) const;
  void register_into(ParameterSet& set, const std::string& prefix) const;
};

// Stack of Linear layers with ReLU after every layer, or after every layer
// but the last when relu_last is false.
struct Mlp {
  std::vector<Linear> layers;
  bool relu_last = true;

  Mlp() = default;
  Mlp(std::size_t in, std::span<const std::size_t> widths, std::mt19937_64& rng, bool relu_last = true);
  std::size_t out_features() const { return layers.back().out_features(); }
  Tensor forward(const Tensor& x) const;
  void register_into(ParameterSet& set, const std::string& prefix) const;
};

// Greedy max-min selection starting from index 0. Returns min(m, n) indices.
std::vector<std::size_t> farthest_point_sample(std::span<const geometry::Vec3> points, std::size_t m);

// For each center, up to `nsample` indices of points within `radius`, in
// index order; short groups are padded with their first member and empty
// groups hold -1. Layout: centers.size() x nsample.
std::vector<std::int64_t> ball_query(std::span<const geometry::Vec3> points, std::span<const geometry::Vec3> centers,
                                     double radius, std::size_t nsample);

struct PointSet {
  std::vector<geometry::Vec3> xyz;
  Tensor features;  // n x C, may be undefined when C = 0
};

// PointNet++ set abstraction: FPS centers, ball grouping, shared MLP over
// [relative xyz, features], max-pool per group.
class SetAbstraction {
 public:
  SetAbstraction() = default;
  SetAbstraction(std::size_t n_centers, double radius, std::size_t nsample, std::size_t in_channels,
                 std::span<const std::size_t> widths, std::mt19937_64& rng);
  PointSet forward(const PointSet& input) const;
  std::size_t out_channels() const { return mlp_.out_features(); }
  void register_into(ParameterSet& set, const std::string& prefix) const;

 private:
  std::size_t n_centers_ = 0;
  double radius_ = 0.0;
  std::size_t nsample_ = 0;
  std::size_t in_channels_ = 0;
  Mlp mlp_;
};

// Inverse-distance interpolation from the three nearest coarse points, with
// the fine skip features concatenated, then a shared MLP. A fine point that
// coincides with a coarse point copies that point's features.
class FeaturePropagation {
 public:
  FeaturePropagation() = default;
  FeaturePropagation(std::size_t coarse_channels, std::size_t skip_channels, std::span<const std::size_t> widths,
                     std::mt19937_64& rng);
  Tensor forward(const PointSet& coarse, const PointSet& fine) const;
  static Tensor interpolate(const PointSet& coarse, std::span<const geometry::Vec3> fine_xyz);
  std::size_t out_channels() const { return mlp_.out_features(); }
  void register_into(ParameterSet& set, const std::string& prefix) const;

 private:
  std::size_t coarse_channels_ = 0;
  std::size_t skip_channels_ = 0;
  Mlp mlp_;
};

struct VoteStackConfig {
  std::size_t in_channels = 58;
  std::vector<std::size_t> centers{1024, 512, 256, 128};
  std::vector<double> radii{0.2, 0.4, 0.8, 1.2};
  std::vector<std::size_t> nsample{32, 16, 16, 16};
  std::vector<std::size_t> sa_mlp{64, 64, 128};
  std::vector<std::size_t> fp1_mlp{128, 128};
  std::vector<std::size_t> fp2_mlp{256, 256};
  std::size_t vote_outputs = 4;
};

// Four set-abstraction levels, two feature-propagation levels back to the
// input points and a linear vote head: n input points -> n x 4
// (three centre offsets and one vote logit).
class VoteStack {
 public:
  VoteStack(const VoteStackConfig& cfg, std::uint64_t seed);
  Tensor forward(const PointSet& input) const;
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

 private:
  VoteStackConfig cfg_;
  std::vector<SetAbstraction> sa_;
  FeaturePropagation fp1_;
  FeaturePropagation fp2_;
  Linear head_;
  ParameterSet params_;
};

}  // namespace anchorvote::micronet
