#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "anchorvote/geometry.hpp"
#include "anchorvote/micronet/tensor.hpp"

namespace anchorvote::micronet {

// Elementwise (identical shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // throws NumericError on non-positive input
// Gradient passes only where lo < a < hi.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// 2D ops.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add_row_bias(const Tensor& a, const Tensor& bias);  // a: m x n, bias: n
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);

// Row gather; index -1 yields a zero row.
Tensor gather_rows(const Tensor& a, std::span<const std::int64_t> index);
// Max over consecutive blocks of `group` rows: (m * group) x c -> m x c.
Tensor group_max(const Tensor& a, std::size_t group);
// out[i] = sum_k weight[i, k] * a[index[i, k]] with `k_per_row` entries per row.
Tensor weighted_gather(const Tensor& a, std::span<const std::int64_t> index, std::span<const double> weight,
                       std::size_t k_per_row);

// H x W x C image to (H' W') x (k k C) patches, zero padding `pad`.
Tensor im2col(const Tensor& image, std::size_t kernel, std::size_t stride, std::size_t pad);
// 3D conv as im2col + matmul. weight: (k k C_in) x C_out, bias: C_out.
Tensor conv2d(const Tensor& image, const Tensor& weight, const Tensor& bias, std::size_t kernel,
              std::size_t stride, std::size_t pad);

// Bilinear RoI pooling of an H x W x C map into P x P x C. Each bin averages
// a 2 x 2 grid of samples. Map coordinates: u = column, v = row, value of
// cell (r, c) sits at (u, v) = (c, r). Samples beyond one cell outside the
// map read as zero; others clamp to the border.
Tensor roi_align(const Tensor& features, const geometry::Rect2D& box, std::size_t out_size);

// Inverted dropout with a mask drawn from `seed`; identity when !training.
Tensor dropout(const Tensor& a, double rate, std::uint64_t seed, bool training);

// Mean binary cross-entropy of probabilities against fixed targets.
Tensor binary_cross_entropy(const Tensor& prob, std::span<const double> target);
// Mean cross-entropy of row logits against class labels.
Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace anchorvote::micronet
