#include "anchorvote/micronet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "anchorvote/error.hpp"

namespace anchorvote::micronet {

using detail::Node;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatchError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                             " differ");
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeMismatchError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_str(a.shape()));
  }
}

// Applies f elementwise; df(x, y) is the local derivative given input and output.
template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  std::vector<double> out(a.numel());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_op(a.shape(), std::move(out), {a}, [df](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * df(pa.data[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i];
      if (pb.requires_grad) pb.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.data[i];
      if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) throw NumericError("log of a non-positive value");
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_op({1}, {s}, {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (double& g : pa.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeMismatchError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeMismatchError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::make_op(std::move(shape), std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeMismatchError("matmul: inner dimensions of " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                             " disagree");
  }
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return Tensor::make_op({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto& G = self.grad;
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * pb.data[p * n + j];
          pa.grad[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa.data[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) pb.grad[p * n + j] += av * G[i * n + j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0);
  const std::size_t n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  }
  return Tensor::make_op({n, m}, std::move(out), {a}, [m, n](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) pa.grad[i * n + j] += self.grad[j * m + i];
    }
  });
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
  require_rank(a, 2, "add_row_bias");
  const std::size_t m = a.dim(0);
  const std::size_t n = a.dim(1);
  if (bias.numel() != n) throw ShapeMismatchError("add_row_bias: bias length must equal column count");
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + bias[j];
  }
  return Tensor::make_op({m, n}, std::move(out), {a, bias}, [m, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double g = self.grad[i * n + j];
        if (pa.requires_grad) pa.grad[i * n + j] += g;
        if (pb.requires_grad) pb.grad[j] += g;
      }
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  require_rank(a, 2, "softmax_rows");
  const std::size_t m = a.dim(0);
  const std::size_t n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, a[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(a[i * n + j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return Tensor::make_op({m, n}, std::move(out), {a}, [m, n](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.data[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        pa.grad[i * n + j] += self.data[i * n + j] * (self.grad[i * n + j] - dot);
      }
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  require_rank(a, 2, "log_softmax_rows");
  const std::size_t m = a.dim(0);
  const std::size_t n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, a[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(a[i * n + j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] - lse;
  }
  return Tensor::make_op({m, n}, std::move(out), {a}, [m, n](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += self.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        pa.grad[i * n + j] += self.grad[i * n + j] - std::exp(self.data[i * n + j]) * gs;
      }
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatchError("concat_cols of nothing");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) throw ShapeMismatchError("concat_cols: row counts differ");
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = parts[k][i * widths[k] + j];
    }
    off += widths[k];
  }
  return Tensor::make_op({m, total}, std::move(out), parts, [m, total, widths](Node& self) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& p = *self.parents[k];
      if (p.requires_grad) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < widths[k]; ++j) p.grad[i * widths[k] + j] += self.grad[i * total + o + j];
        }
      }
      o += widths[k];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatchError("concat_rows of nothing");
  const std::size_t n = parts[0].dim(1);
  std::size_t rows = 0;
  std::vector<double> out;
  std::vector<std::size_t> sizes;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != n) throw ShapeMismatchError("concat_rows: column counts differ");
    rows += p.dim(0);
    sizes.push_back(p.numel());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return Tensor::make_op({rows, n}, std::move(out), parts, [sizes](Node& self) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      Node& p = *self.parents[k];
      if (p.requires_grad) {
        for (std::size_t i = 0; i < sizes[k]; ++i) p.grad[i] += self.grad[o + i];
      }
      o += sizes[k];
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_rank(a, 2, "slice_cols");
  const std::size_t m = a.dim(0);
  const std::size_t n = a.dim(1);
  if (start + count > n) throw ShapeMismatchError("slice_cols out of range");
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = a[i * n + start + j];
  }
  return Tensor::make_op({m, count}, std::move(out), {a}, [m, n, start, count](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < count; ++j) pa.grad[i * n + start + j] += self.grad[i * count + j];
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  require_rank(a, 2, "slice_rows");
  const std::size_t n = a.dim(1);
  if (start + count > a.dim(0)) throw ShapeMismatchError("slice_rows out of range");
  std::vector<double> out(a.data().begin() + static_cast<long>(start * n),
                          a.data().begin() + static_cast<long>((start + count) * n));
  return Tensor::make_op({count, n}, std::move(out), {a}, [n, start](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[start * n + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::int64_t> index) {
  require_rank(a, 2, "gather_rows");
  const std::size_t rows = a.dim(0);
  const std::size_t n = a.dim(1);
  std::vector<std::int64_t> idx(index.begin(), index.end());
  std::vector<double> out(idx.size() * n, 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0) continue;
    if (static_cast<std::size_t>(idx[i]) >= rows) throw ShapeMismatchError("gather_rows index out of range");
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[static_cast<std::size_t>(idx[i]) * n + j];
  }
  const std::size_t m = idx.size();
  return Tensor::make_op({m, n}, std::move(out), {a}, [idx = std::move(idx), n](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      for (std::size_t j = 0; j < n; ++j) pa.grad[static_cast<std::size_t>(idx[i]) * n + j] += self.grad[i * n + j];
    }
  });
}

Tensor group_max(const Tensor& a, std::size_t group) {
  require_rank(a, 2, "group_max");
  if (group == 0 || a.dim(0) % group != 0) throw ShapeMismatchError("group_max: rows not divisible by group");
  const std::size_t m = a.dim(0) / group;
  const std::size_t n = a.dim(1);
  std::vector<double> out(m * n);
  std::vector<std::size_t> arg(m * n);
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t best = g * group;
      for (std::size_t r = g * group + 1; r < (g + 1) * group; ++r) {
        if (a[r * n + j] > a[best * n + j]) best = r;
      }
      arg[g * n + j] = best;
      out[g * n + j] = a[best * n + j];
    }
  }
  return Tensor::make_op({m, n}, std::move(out), {a}, [arg = std::move(arg), n](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t k = 0; k < arg.size(); ++k) pa.grad[arg[k] * n + k % n] += self.grad[k];
  });
}

Tensor weighted_gather(const Tensor& a, std::span<const std::int64_t> index, std::span<const double> weight,
                       std::size_t k_per_row) {
  require_rank(a, 2, "weighted_gather");
  if (k_per_row == 0 || index.size() != weight.size() || index.size() % k_per_row != 0) {
    throw ShapeMismatchError("weighted_gather: index/weight layout mismatch");
  }
  const std::size_t rows = index.size() / k_per_row;
  const std::size_t n = a.dim(1);
  std::vector<std::int64_t> idx(index.begin(), index.end());
  std::vector<double> w(weight.begin(), weight.end());
  std::vector<double> out(rows * n, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < k_per_row; ++k) {
      const std::int64_t src = idx[i * k_per_row + k];
      if (src < 0) continue;
      if (static_cast<std::size_t>(src) >= a.dim(0)) throw ShapeMismatchError("weighted_gather index out of range");
      const double wk = w[i * k_per_row + k];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += wk * a[static_cast<std::size_t>(src) * n + j];
    }
  }
  return Tensor::make_op({rows, n}, std::move(out), {a},
                         [idx = std::move(idx), w = std::move(w), n, k_per_row, rows](Node& self) {
                           Node& pa = *self.parents[0];
                           if (!pa.requires_grad) return;
                           for (std::size_t i = 0; i < rows; ++i) {
                             for (std::size_t k = 0; k < k_per_row; ++k) {
                               const std::int64_t src = idx[i * k_per_row + k];
                               if (src < 0) continue;
                               const double wk = w[i * k_per_row + k];
                               for (std::size_t j = 0; j < n; ++j) {
                                 pa.grad[static_cast<std::size_t>(src) * n + j] += wk * self.grad[i * n + j];
                               }
                             }
                           }
                         });
}

Tensor im2col(const Tensor& image, std::size_t kernel, std::size_t stride, std::size_t pad) {
  require_rank(image, 3, "im2col");
  const std::size_t H = image.dim(0);
  const std::size_t W = image.dim(1);
  const std::size_t C = image.dim(2);
  if (stride == 0 || H + 2 * pad < kernel || W + 2 * pad < kernel) {
    throw ShapeMismatchError("im2col: kernel larger than padded image");
  }
  const std::size_t Ho = (H + 2 * pad - kernel) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kernel) / stride + 1;
  const std::size_t cols = kernel * kernel * C;
  // src[k] is the flat input index feeding output element k, or -1 for padding.
  std::vector<std::int64_t> src(Ho * Wo * cols, -1);
  for (std::size_t oy = 0; oy < Ho; ++oy) {
    for (std::size_t ox = 0; ox < Wo; ++ox) {
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
        if (iy < 0 || iy >= static_cast<long>(H)) continue;
        for (std::size_t kx = 0; kx < kernel; ++kx) {
          const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
          if (ix < 0 || ix >= static_cast<long>(W)) continue;
          for (std::size_t c = 0; c < C; ++c) {
            src[(oy * Wo + ox) * cols + (ky * kernel + kx) * C + c] =
                static_cast<std::int64_t>((static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * C + c);
          }
        }
      }
    }
  }
  std::vector<double> out(src.size(), 0.0);
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k] >= 0) out[k] = image[static_cast<std::size_t>(src[k])];
  }
  return Tensor::make_op({Ho * Wo, cols}, std::move(out), {image}, [src = std::move(src)](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t k = 0; k < src.size(); ++k) {
      if (src[k] >= 0) pa.grad[static_cast<std::size_t>(src[k])] += self.grad[k];
    }
  });
}

Tensor conv2d(const Tensor& image, const Tensor& weight, const Tensor& bias, std::size_t kernel, std::size_t stride,
              std::size_t pad) {
  require_rank(image, 3, "conv2d");
  const std::size_t H = image.dim(0);
  const std::size_t W = image.dim(1);
  const std::size_t Ho = (H + 2 * pad - kernel) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kernel) / stride + 1;
  if (weight.rank() != 2 || weight.dim(0) != kernel * kernel * image.dim(2)) {
    throw ShapeMismatchError("conv2d: weight must be (k*k*C_in) x C_out");
  }
  const Tensor cols = im2col(image, kernel, stride, pad);
  const Tensor out = add_row_bias(matmul(cols, weight), bias);
  return reshape(out, {Ho, Wo, weight.dim(1)});
}

Tensor roi_align(const Tensor& features, const geometry::Rect2D& box, std::size_t out_size) {
  require_rank(features, 3, "roi_align");
  if (!(box.width > 0.0 && box.height > 0.0)) throw InvalidArgumentError("roi_align box has zero area");
  if (out_size == 0) throw InvalidArgumentError("roi_align output size must be positive");
  const std::size_t H = features.dim(0);
  const std::size_t W = features.dim(1);
  const std::size_t C = features.dim(2);
  const std::size_t P = out_size;
  const double ca = std::cos(box.angle);
  const double sa = std::sin(box.angle);
  const double bw = box.width / static_cast<double>(P);
  const double bh = box.height / static_cast<double>(P);

  // Four samples per bin, four bilinear taps per sample.
  struct Tap {
    std::int64_t cell = -1;
    double w = 0.0;
  };
  std::vector<Tap> taps(P * P * 16);
  for (std::size_t py = 0; py < P; ++py) {
    for (std::size_t px = 0; px < P; ++px) {
      for (std::size_t s = 0; s < 4; ++s) {
        const double lu = -0.5 * box.width + (static_cast<double>(px) + (static_cast<double>(s % 2) + 0.5) / 2.0) * bw;
        const double lv = -0.5 * box.height + (static_cast<double>(py) + (static_cast<double>(s / 2) + 0.5) / 2.0) * bh;
        double u = box.center.x + ca * lu - sa * lv;
        double v = box.center.y + sa * lu + ca * lv;
        Tap* t = &taps[((py * P + px) * 4 + s) * 4];
        if (v < -1.0 || v > static_cast<double>(H) || u < -1.0 || u > static_cast<double>(W)) continue;
        v = std::clamp(v, 0.0, static_cast<double>(H - 1));
        u = std::clamp(u, 0.0, static_cast<double>(W - 1));
        const auto v0 = static_cast<std::size_t>(std::floor(v));
        const auto u0 = static_cast<std::size_t>(std::floor(u));
        const std::size_t v1 = std::min(v0 + 1, H - 1);
        const std::size_t u1 = std::min(u0 + 1, W - 1);
        const double fv = v - static_cast<double>(v0);
        const double fu = u - static_cast<double>(u0);
        t[0] = {static_cast<std::int64_t>(v0 * W + u0), (1.0 - fv) * (1.0 - fu)};
        t[1] = {static_cast<std::int64_t>(v0 * W + u1), (1.0 - fv) * fu};
        t[2] = {static_cast<std::int64_t>(v1 * W + u0), fv * (1.0 - fu)};
        t[3] = {static_cast<std::int64_t>(v1 * W + u1), fv * fu};
      }
    }
  }
  std::vector<double> out(P * P * C, 0.0);
  for (std::size_t b = 0; b < P * P; ++b) {
    for (std::size_t k = 0; k < 16; ++k) {
      const Tap& t = taps[b * 16 + k];
      if (t.cell < 0 || t.w == 0.0) continue;
      for (std::size_t c = 0; c < C; ++c) {
        out[b * C + c] += 0.25 * t.w * features[static_cast<std::size_t>(t.cell) * C + c];
      }
    }
  }
  return Tensor::make_op({P, P, C}, std::move(out), {features}, [taps = std::move(taps), C, P](Node& self) {
    Node& pf = *self.parents[0];
    if (!pf.requires_grad) return;
    for (std::size_t b = 0; b < P * P; ++b) {
      for (std::size_t k = 0; k < 16; ++k) {
        const Tap& t = taps[b * 16 + k];
        if (t.cell < 0 || t.w == 0.0) continue;
        for (std::size_t c = 0; c < C; ++c) {
          pf.grad[static_cast<std::size_t>(t.cell) * C + c] += 0.25 * t.w * self.grad[b * C + c];
        }
      }
    }
  });
}

Tensor dropout(const Tensor& a, double rate, std::uint64_t seed, bool training) {
  if (!training || rate <= 0.0) return a;
  if (rate >= 1.0) throw InvalidArgumentError("dropout rate must be below 1");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<double> mask(a.numel());
  for (double& m : mask) m = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul(a, Tensor::constant(a.shape(), std::move(mask)));
}

Tensor binary_cross_entropy(const Tensor& prob, std::span<const double> target) {
  if (prob.numel() != target.size() || target.empty()) {
    throw ShapeMismatchError("binary_cross_entropy: one target per probability required");
  }
  std::vector<double> t(target.begin(), target.end());
  const double n = static_cast<double>(t.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double p = prob[i];
    if (!(p > 0.0 && p < 1.0)) throw NumericError("binary_cross_entropy needs probabilities in (0, 1)");
    loss -= t[i] * std::log(p) + (1.0 - t[i]) * std::log(1.0 - p);
  }
  return Tensor::make_op({1}, {loss / n}, {prob}, [t = std::move(t), n](Node& self) {
    Node& pp = *self.parents[0];
    if (!pp.requires_grad) return;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double p = pp.data[i];
      pp.grad[i] += self.grad[0] * (-t[i] / p + (1.0 - t[i]) / (1.0 - p)) / n;
    }
  });
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels) {
  require_rank(logits, 2, "cross_entropy_rows");
  const std::size_t m = logits.dim(0);
  const std::size_t n = logits.dim(1);
  if (labels.size() != m) throw ShapeMismatchError("cross_entropy_rows: one label per row required");
  std::vector<double> onehot(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] >= n) throw ShapeMismatchError("cross_entropy_rows: label out of range");
    onehot[i * n + labels[i]] = -1.0 / static_cast<double>(m);
  }
  return sum(mul(log_softmax_rows(logits), Tensor::constant({m, n}, std::move(onehot))));
}

}  // namespace anchorvote::micronet
