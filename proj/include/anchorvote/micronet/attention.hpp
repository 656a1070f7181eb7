#pragma once

#include <random>
#include <string>
#include <vector>

#include "anchorvote/micronet/tensor.hpp"

namespace anchorvote::micronet {

// softmax(Q K^T / sqrt(d_k)) V. Q: n x d_k, K: m x d_k, V: m x d_v.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Per-head projections W_q[i], W_k[i]: d_model x d_k, W_v[i]: d_model x d_v,
// and the output projection W_o: (h * d_v) x d_model.
struct AttentionParams {
  std::size_t d_model = 0;
  std::size_t heads = 1;
  std::size_t d_k = 0;
  std::size_t d_v = 0;
  std::vector<Tensor> w_q;
  std::vector<Tensor> w_k;
  std::vector<Tensor> w_v;
  Tensor w_o;

  static AttentionParams random(std::size_t d_model, std::size_t heads, std::size_t d_k, std::size_t d_v,
                                std::mt19937_64& rng, double stddev);
  void validate() const;
  void register_into(ParameterSet& set, const std::string& prefix) const;
};

// Concat(head_1, ..., head_h) W_o with head_i = attention(x_q W_q[i], x_kv W_k[i], x_kv W_v[i]).
Tensor multi_head(const Tensor& x_q, const Tensor& x_kv, const AttentionParams& params);

}  // namespace anchorvote::micronet
