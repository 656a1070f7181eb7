#include "anchorvote/micronet/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anchorvote/error.hpp"
#include "anchorvote/micronet/ops.hpp"

namespace anchorvote::micronet {

namespace {

void require_matrix(const Tensor& t, std::size_t rows, std::size_t cols, const char* what) {
  if (!t.defined() || t.rank() != 2 || t.dim(0) != rows || t.dim(1) != cols) {
    throw ShapeMismatchError(std::string(what) + " must be " + std::to_string(rows) + " x " + std::to_string(cols));
  }
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw ShapeMismatchError("attention expects matrices");
  if (q.dim(1) != k.dim(1)) throw ShapeMismatchError("attention: Q and K widths differ");
  if (k.dim(0) != v.dim(0)) throw ShapeMismatchError("attention: K and V row counts differ");
  if (q.dim(1) == 0) throw ShapeMismatchError("attention: d_k must be at least 1");
  // Key/value pairs are reduced in lexicographic order of their contents, so
  // permuting the K/V rows leaves every floating-point sum unchanged.
  const std::size_t m = k.dim(0), dk = k.dim(1), dv = v.dim(1);
  std::vector<std::int64_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](std::int64_t a, std::int64_t b) {
    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    for (std::size_t t = 0; t < dk; ++t) {
      if (k[ua * dk + t] != k[ub * dk + t]) return k[ua * dk + t] < k[ub * dk + t];
    }
    for (std::size_t t = 0; t < dv; ++t) {
      if (v[ua * dv + t] != v[ub * dv + t]) return v[ua * dv + t] < v[ub * dv + t];
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), row_less);
  const Tensor ks = gather_rows(k, order);
  const Tensor vs = gather_rows(v, order);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  const Tensor weights = softmax_rows(scale(matmul(q, transpose(ks)), inv));
  return matmul(weights, vs);
}

AttentionParams AttentionParams::random(std::size_t d_model, std::size_t heads, std::size_t d_k, std::size_t d_v,
                                        std::mt19937_64& rng, double stddev) {
  AttentionParams p;
  p.d_model = d_model;
  p.heads = heads;
  p.d_k = d_k;
  p.d_v = d_v;
  for (std::size_t i = 0; i < heads; ++i) {
    p.w_q.push_back(normal_parameter({d_model, d_k}, stddev, rng));
    p.w_k.push_back(normal_parameter({d_model, d_k}, stddev, rng));
    p.w_v.push_back(normal_parameter({d_model, d_v}, stddev, rng));
  }
  p.w_o = normal_parameter({heads * d_v, d_model}, stddev, rng);
  return p;
}

void AttentionParams::validate() const {
  if (heads == 0) throw ShapeMismatchError("attention needs at least one head");
  if (w_q.size() != heads || w_k.size() != heads || w_v.size() != heads) {
    throw ShapeMismatchError("attention: one projection per head required");
  }
  for (std::size_t i = 0; i < heads; ++i) {
    require_matrix(w_q[i], d_model, d_k, "W_q");
    require_matrix(w_k[i], d_model, d_k, "W_k");
    require_matrix(w_v[i], d_model, d_v, "W_v");
  }
  require_matrix(w_o, heads * d_v, d_model, "W_o");
}

void AttentionParams::register_into(ParameterSet& set, const std::string& prefix) const {
  for (std::size_t i = 0; i < heads; ++i) {
    const std::string h = std::to_string(i);
    set.add(prefix + ".w_q" + h, w_q[i]);
    set.add(prefix + ".w_k" + h, w_k[i]);
    set.add(prefix + ".w_v" + h, w_v[i]);
  }
  set.add(prefix + ".w_o", w_o);
}

Tensor multi_head(const Tensor& x_q, const Tensor& x_kv, const AttentionParams& params) {
  params.validate();
  if (x_q.rank() != 2 || x_q.dim(1) != params.d_model || x_kv.rank() != 2 || x_kv.dim(1) != params.d_model) {
    throw ShapeMismatchError("multi_head inputs must have d_model columns");
  }
  std::vector<Tensor> heads;
  heads.reserve(params.heads);
  for (std::size_t i = 0; i < params.heads; ++i) {
    heads.push_back(attention(matmul(x_q, params.w_q[i]), matmul(x_kv, params.w_k[i]), matmul(x_kv, params.w_v[i])));
  }
  const Tensor cat = params.heads == 1 ? heads[0] : concat_cols(heads);
  return matmul(cat, params.w_o);
}

}  // namespace anchorvote::micronet
