#pragma once

#include "mtk/nn.hpp"

// Multi-head self- and cross-attention with residual connections. No
// positional encoding lives here: temporal order is carried by the
// convolution and scan paths, attention treats its inputs as a set.

namespace mtk::attn {

using nd::Array;

struct AttentionConfig {
  int64_t dim = 64;
  int64_t heads = 4;
};

struct MultiHeadAttention {
  AttentionConfig cfg;
  nn::Linear wq, wk, wv, wo;  // all dim -> dim

  MultiHeadAttention() = default;
  MultiHeadAttention(AttentionConfig config, Rng& rng);

  // x: (B, M, D) -> (B, M, D), residual added
  Array self_attn(const Array& x, Array* weights_out = nullptr) const;
  // q: (B, Mq, D), kv: (B, Mk, D) -> (B, Mq, D), residual adds q
  Array cross_attn(const Array& q, const Array& kv, Array* weights_out = nullptr) const;

  void params(const std::string& prefix, nn::ParamMap& pm) const;

 private:
  // shared core; weights_out, when set, receives (B, h, Mq, Mk)
  Array attend(const Array& q_in, const Array& kv_in, const Array& residual,
               Array* weights_out) const;
};

}  // namespace mtk::attn
