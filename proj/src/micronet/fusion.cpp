#include "anchorvote/micronet/fusion.hpp"

#include <cmath>

#include "anchorvote/error.hpp"
#include "anchorvote/micronet/ops.hpp"

namespace anchorvote::micronet {

void FusionConfig::validate() const {
  if (in_channels == 0 || input_size == 0) throw InvalidArgumentError("fusion input must be non-empty");
  if (a_widths.empty() || b_widths.empty()) throw InvalidArgumentError("fusion branches need at least one layer");
  if (a_widths.back() != b_widths.back()) {
    throw InvalidArgumentError("fusion branches must end with the same channel count");
  }
  if (roi_size == 0 || hidden == 0 || n_classes == 0 || conv1d_kernel == 0) {
    throw InvalidArgumentError("fusion sizes must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgumentError("dropout rate must lie in [0, 1)");
}

namespace {

// Keeps ReLU inputs off the kink where a window of dead activations feeds a conv.
constexpr double kConvBiasInit = 0.01;

}  // namespace

FusionConfig FusionConfig::toy() {
  FusionConfig c;
  c.input_size = 16;
  c.a_widths = {2, 3, 3};
  c.n_sa = 1;
  c.b_widths = {3, 3, 3};
  c.roi_size = 2;
  c.hidden = 4;
  return c;
}

Conv::Conv(std::size_t in, std::size_t out, std::size_t s, std::mt19937_64& rng)
    : weight(normal_parameter({9 * in, out}, std::sqrt(2.0 / (9.0 * static_cast<double>(in))), rng)),
      bias(Tensor::parameter({out}, std::vector<double>(out, kConvBiasInit))),
      stride(s) {}

Tensor Conv::forward(const Tensor& x) const { return conv2d(x, weight, bias, 3, stride, 1); }

void Conv::register_into(ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + ".weight", weight);
  set.add(prefix + ".bias", bias);
}

SelfAttentionBlock::SelfAttentionBlock(std::size_t channels, std::size_t k, std::mt19937_64& rng)
    : attn(AttentionParams::random(channels, 1, channels, channels, rng, 1.0 / std::sqrt(static_cast<double>(channels)))),
      conv_weight(normal_parameter({k * channels, channels},
                                   std::sqrt(2.0 / static_cast<double>(k * channels)), rng)),
      conv_bias(Tensor::parameter({channels}, std::vector<double>(channels, 0.0))),
      kernel(k) {}

Tensor SelfAttentionBlock::forward(const Tensor& tokens) const {
  const Tensor x = add(tokens, multi_head(tokens, tokens, attn));
  const std::size_t n = x.dim(0);
  // Kernel taps at offsets -(k-1)/2 ... k/2; taps past either end read zero.
  const long first = -static_cast<long>((kernel - 1) / 2);
  std::vector<Tensor> taps;
  for (std::size_t t = 0; t < kernel; ++t) {
    std::vector<std::int64_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
      const long j = static_cast<long>(i) + first + static_cast<long>(t);
      idx[i] = (j < 0 || j >= static_cast<long>(n)) ? -1 : j;
    }
    taps.push_back(gather_rows(x, idx));
  }
  const Tensor conv = add_row_bias(matmul(concat_cols(taps), conv_weight), conv_bias);
  return add(x, relu(conv));
}

void SelfAttentionBlock::register_into(ParameterSet& set, const std::string& prefix) const {
  attn.register_into(set, prefix + ".attn");
  set.add(prefix + ".conv1d.weight", conv_weight);
  set.add(prefix + ".conv1d.bias", conv_bias);
}

FusionNet::FusionNet(const FusionConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  std::size_t ch = cfg_.in_channels;
  for (std::size_t w : cfg_.a_widths) {
    a_convs_.emplace_back(ch, w, 2, rng);
    ch = w;
  }
  for (std::size_t i = 0; i < cfg_.n_sa; ++i) {
    sa_convs_.emplace_back(ch, ch, 1, rng);
    sa_blocks_.emplace_back(ch, cfg_.conv1d_kernel, rng);
  }
  ch = cfg_.in_channels;
  for (std::size_t w : cfg_.b_widths) {
    b_down_.emplace_back(ch, w, 2, rng);
    b_res_.emplace_back(w, w, 1, rng);
    ch = w;
  }
  const std::size_t flat = cfg_.roi_size * cfg_.roi_size * ch;
  const std::vector<std::size_t> cls_w{cfg_.hidden, cfg_.n_classes + 1};
  const std::vector<std::size_t> rot_w{cfg_.hidden, static_cast<std::size_t>(kViewpointBins)};
  cls_head_ = Mlp(flat, cls_w, rng, false);
  rot_head_ = Mlp(flat, rot_w, rng, false);

  for (std::size_t i = 0; i < a_convs_.size(); ++i) a_convs_[i].register_into(params_, "a.conv" + std::to_string(i));
  for (std::size_t i = 0; i < sa_blocks_.size(); ++i) {
    sa_convs_[i].register_into(params_, "a.sa" + std::to_string(i) + ".conv");
    sa_blocks_[i].register_into(params_, "a.sa" + std::to_string(i));
  }
  for (std::size_t i = 0; i < b_down_.size(); ++i) {
    b_down_[i].register_into(params_, "b.stage" + std::to_string(i) + ".down");
    b_res_[i].register_into(params_, "b.stage" + std::to_string(i) + ".res");
  }
  cls_head_.register_into(params_, "head.cls");
  rot_head_.register_into(params_, "head.rot");
}

Tensor FusionNet::branch_a(const Tensor& image) const {
  Tensor h = image;
  for (const auto& c : a_convs_) h = relu(c.forward(h));
  for (std::size_t i = 0; i < sa_blocks_.size(); ++i) {
    h = relu(sa_convs_[i].forward(h));
    const Shape s = h.shape();
    h = reshape(sa_blocks_[i].forward(reshape(h, {s[0] * s[1], s[2]})), s);
  }
  return h;
}

Tensor FusionNet::branch_b(const Tensor& image) const {
  Tensor h = image;
  for (std::size_t i = 0; i < b_down_.size(); ++i) {
    const Tensor d = relu(b_down_[i].forward(h));
    h = relu(add(d, b_res_[i].forward(d)));
  }
  return h;
}

FusionOutput FusionNet::forward(const Tensor& image, std::span<const geometry::Rect2D> proposals, bool training,
                                std::uint64_t dropout_seed) const {
  if (image.rank() != 3 || image.dim(0) != cfg_.input_size || image.dim(1) != cfg_.input_size ||
      image.dim(2) != cfg_.in_channels) {
    throw ShapeMismatchError("fusion input must be " + std::to_string(cfg_.input_size) + " x " +
                             std::to_string(cfg_.input_size) + " x " + std::to_string(cfg_.in_channels) + ", got " +
                             shape_str(image.shape()));
  }
  if (proposals.empty()) throw InvalidArgumentError("fusion forward needs at least one proposal");
  const Tensor fa = branch_a(image);
  const Tensor fb = branch_b(image);
  const double sa = static_cast<double>(fa.dim(0)) / static_cast<double>(cfg_.input_size);
  const double sb = static_cast<double>(fb.dim(0)) / static_cast<double>(cfg_.input_size);
  const std::size_t flat = cfg_.roi_size * cfg_.roi_size * fa.dim(2);
  std::vector<Tensor> rows;
  rows.reserve(proposals.size());
  for (const auto& r : proposals) {
    const geometry::Rect2D ra{{r.center.x * sa, r.center.y * sa}, r.width * sa, r.height * sa, r.angle};
    const geometry::Rect2D rb{{r.center.x * sb, r.center.y * sb}, r.width * sb, r.height * sb, r.angle};
    const Tensor fused = add(roi_align(fa, ra, cfg_.roi_size), roi_align(fb, rb, cfg_.roi_size));
    rows.push_back(reshape(fused, {1, flat}));
  }
  Tensor x = rows.size() == 1 ? rows[0] : concat_rows(rows);
  x = dropout(x, cfg_.dropout, dropout_seed, training);
  return {cls_head_.forward(x), rot_head_.forward(x)};
}

Tensor FusionNet::foreground_prob(const FusionOutput& out) const {
  return slice_cols(softmax_rows(out.class_logits), 1, 1);
}

void FusionNet::fill(double value) {
  for (auto& e : params_) {
    for (double& v : e.second.mutable_data()) v = value;
  }
}

}  // namespace anchorvote::micronet
