#include "mtk/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace mtk::attn {

MultiHeadAttention::MultiHeadAttention(AttentionConfig config, Rng& rng)
    : cfg(config),
      wq(config.dim, config.dim, rng),
      wk(config.dim, config.dim, rng),
      wv(config.dim, config.dim, rng),
      wo(config.dim, config.dim, rng) {
  if (config.dim % config.heads != 0)
    throw std::invalid_argument("attention dim must be divisible by head count");
}

Array MultiHeadAttention::attend(const Array& q_in, const Array& kv_in,
                                 const Array& residual, Array* weights_out) const {
  int64_t B = q_in.dim(0), mq = q_in.dim(1);
  int64_t mk = kv_in.dim(1);
  int64_t h = cfg.heads, dh = cfg.dim / cfg.heads;

  auto heads_of = [&](const Array& proj, int64_t m) {
    // (B, M, D) -> (B, h, M, dh)
    return nd::permute(nd::reshape(proj, {B, m, h, dh}), {0, 2, 1, 3});
  };
  Array q = heads_of(wq(q_in), mq);
  Array k = heads_of(wk(kv_in), mk);
  Array v = heads_of(wv(kv_in), mk);

  Array scores = nd::mul_scalar(nd::matmul(q, nd::transpose2d(k)),
                                1.0 / std::sqrt(double(dh)));  // (B,h,Mq,Mk)
  Array weights = nd::softmax(scores, -1);
  if (weights_out) *weights_out = weights;
  Array ctx = nd::matmul(weights, v);  // (B,h,Mq,dh)
  Array merged = nd::reshape(nd::permute(ctx, {0, 2, 1, 3}), {B, mq, cfg.dim});
  return nd::add(wo(merged), residual);
}

Array MultiHeadAttention::self_attn(const Array& x, Array* weights_out) const {
  return attend(x, x, x, weights_out);
}

Array MultiHeadAttention::cross_attn(const Array& q, const Array& kv,
                                     Array* weights_out) const {
  return attend(q, kv, q, weights_out);
}

void MultiHeadAttention::params(const std::string& prefix, nn::ParamMap& pm) const {
  wq.params(prefix + ".wq", pm);
  wk.params(prefix + ".wk", pm);
  wv.params(prefix + ".wv", pm);
  wo.params(prefix + ".wo", pm);
}

}  // namespace mtk::attn
