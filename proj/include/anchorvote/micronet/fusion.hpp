#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "anchorvote/geometry.hpp"
#include "anchorvote/micronet/attention.hpp"
#include "anchorvote/micronet/layers.hpp"
#include "anchorvote/micronet/tensor.hpp"
#include "anchorvote/micronet/viewpoint.hpp"

namespace anchorvote::micronet {

struct FusionConfig {
  std::size_t input_size = 128;
  std::size_t in_channels = 3;
  // Branch A: stride-2 convs, then n_sa blocks of conv + self-attention.
  std::vector<std::size_t> a_widths{8, 16, 16};
  std::size_t n_sa = 4;
  std::size_t conv1d_kernel = 4;
  // Branch B: stride-2 residual stages; the last width must equal branch A's.
  std::vector<std::size_t> b_widths{8, 8, 16, 16, 16};
  std::size_t roi_size = 2;
  std::size_t hidden = 32;
  std::size_t n_classes = 1;  // foreground classes L; the class head emits L + 1
  double dropout = 0.5;

  void validate() const;
  // 16 x 16 input with narrow layers, for gradient checks.
  static FusionConfig toy();
};

struct FusionOutput {
  Tensor class_logits;     // n x (L + 1); column 0 is background
  Tensor rotation_logits;  // n x 16
};

struct Conv {
  Tensor weight;  // (3 * 3 * C_in) x C_out
  Tensor bias;
  std::size_t stride = 1;

  Conv() = default;
  Conv(std::size_t in, std::size_t out, std::size_t stride, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  void register_into(ParameterSet& set, const std::string& prefix) const;
};

// Residual self-attention block over a token sequence: one attention head
// with a residual connection, then a 1D convolution along the tokens.
struct SelfAttentionBlock {
  AttentionParams attn;
  Tensor conv_weight;  // (kernel * C) x C
  Tensor conv_bias;
  std::size_t kernel = 4;

  SelfAttentionBlock() = default;
  SelfAttentionBlock(std::size_t channels, std::size_t kernel, std::mt19937_64& rng);
  Tensor forward(const Tensor& tokens) const;
  void register_into(ParameterSet& set, const std::string& prefix) const;
};

// Two-branch student network. Proposal rectangles are in input pixel
// coordinates (u = column, v = row).
class FusionNet {
 public:
  FusionNet(const FusionConfig& cfg, std::uint64_t seed);

  FusionOutput forward(const Tensor& image, std::span<const geometry::Rect2D> proposals, bool training = false,
                       std::uint64_t dropout_seed = 0) const;
  // Softmax foreground probability of class 1 per proposal, n x 1.
  Tensor foreground_prob(const FusionOutput& out) const;

  const FusionConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  void fill(double value);

 private:
  Tensor branch_a(const Tensor& image) const;
  Tensor branch_b(const Tensor& image) const;

  FusionConfig cfg_;
  std::vector<Conv> a_convs_;
  std::vector<Conv> sa_convs_;
  std::vector<SelfAttentionBlock> sa_blocks_;
  std::vector<Conv> b_down_;
  std::vector<Conv> b_res_;
  Mlp cls_head_;
  Mlp rot_head_;
  ParameterSet params_;
};

}  // namespace anchorvote::micronet
