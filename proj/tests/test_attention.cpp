#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "grad_registry.hpp"
#include "mtk/attention.hpp"
#include "oracles.hpp"

using namespace mtk;
using nd::Array;

namespace {

// plain-loop y = x W + b on raw buffers
std::vector<double> apply_linear(const std::vector<double>& x, int64_t rows,
                                 const nn::Linear& lin) {
  int64_t in = lin.w.dim(0), out = lin.w.dim(1);
  std::vector<double> y(static_cast<size_t>(rows * out), 0.0);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < out; ++j) {
      double acc = lin.b.defined() ? lin.b.data()[size_t(j)] : 0.0;
      for (int64_t i = 0; i < in; ++i)
        acc += x[size_t(r * in + i)] * lin.w.data()[size_t(i * out + j)];
      y[size_t(r * out + j)] = acc;
    }
  return y;
}

// direct-definition multi-head attention with residual, no batching
std::vector<double> oracle_mha(const attn::MultiHeadAttention& blk,
                               const std::vector<double>& q_in, int64_t mq,
                               const std::vector<double>& kv_in, int64_t mk) {
  int64_t d = blk.cfg.dim, h = blk.cfg.heads, dh = d / h;
  auto q = apply_linear(q_in, mq, blk.wq);
  auto k = apply_linear(kv_in, mk, blk.wk);
  auto v = apply_linear(kv_in, mk, blk.wv);
  std::vector<double> ctx(static_cast<size_t>(mq * d), 0.0);
  for (int64_t head = 0; head < h; ++head) {
    std::vector<double> qh(static_cast<size_t>(mq * dh)), kh(static_cast<size_t>(mk * dh)),
        vh(static_cast<size_t>(mk * dh));
    for (int64_t t = 0; t < mq; ++t)
      for (int64_t c = 0; c < dh; ++c)
        qh[size_t(t * dh + c)] = q[size_t(t * d + head * dh + c)];
    for (int64_t t = 0; t < mk; ++t)
      for (int64_t c = 0; c < dh; ++c) {
        kh[size_t(t * dh + c)] = k[size_t(t * d + head * dh + c)];
        vh[size_t(t * dh + c)] = v[size_t(t * d + head * dh + c)];
      }
    auto oh = testing::reference_attention(qh, kh, vh, mq, mk, dh);
    for (int64_t t = 0; t < mq; ++t)
      for (int64_t c = 0; c < dh; ++c)
        ctx[size_t(t * d + head * dh + c)] = oh[size_t(t * dh + c)];
  }
  auto out = apply_linear(ctx, mq, blk.wo);
  for (size_t i = 0; i < out.size(); ++i) out[i] += q_in[i];
  return out;
}

}  // namespace

TEST_CASE("self-attention with a single token") {
  Rng rng(3);
  attn::MultiHeadAttention blk({8, 2}, rng);
  auto x = testing::rand_arr(rng, {1, 1, 8});
  Array w;
  auto y = blk.self_attn(x, &w);
  // softmax over one key is exactly 1
  for (double v : w.data()) CHECK(v == doctest::Approx(1.0));
  // output = wo(wv(x)) + x
  auto vx = apply_linear(x.data(), 1, blk.wv);
  auto expect = apply_linear(vx, 1, blk.wo);
  for (size_t i = 0; i < expect.size(); ++i)
    CHECK(y.data()[i] == doctest::Approx(expect[i] + x.data()[i]).epsilon(1e-12));
}

TEST_CASE("identical tokens give uniform attention") {
  Rng rng(17);
  attn::MultiHeadAttention blk({8, 4}, rng);
  int64_t M = 6;
  auto row = testing::rand_arr(rng, {8});
  auto x = Array::zeros({1, M, 8});
  for (int64_t t = 0; t < M; ++t)
    for (int64_t c = 0; c < 8; ++c)
      x.mutable_data()[size_t(t * 8 + c)] = row.data()[size_t(c)];
  Array w;
  blk.self_attn(x, &w);
  for (double v : w.data()) CHECK(v == doctest::Approx(1.0 / double(M)).epsilon(1e-12));
}

TEST_CASE("self-attention matches the direct-definition oracle") {
  Rng rng(23);
  attn::MultiHeadAttention blk({8, 2}, rng);
  auto x = testing::rand_arr(rng, {1, 5, 8});
  auto y = blk.self_attn(x);
  auto ref = oracle_mha(blk, x.data(), 5, x.data(), 5);
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK(std::abs(y.data()[i] - ref[i]) < 1e-12);
}

TEST_CASE("cross-attention basics and oracle") {
  Rng rng(31);
  attn::MultiHeadAttention blk({8, 2}, rng);

  // a single kv token receives weight 1 from every query
  auto q1 = testing::rand_arr(rng, {1, 4, 8});
  auto kv1 = testing::rand_arr(rng, {1, 1, 8});
  Array w;
  auto y1 = blk.cross_attn(q1, kv1, &w);
  CHECK(y1.shape() == nd::Shape{1, 4, 8});
  for (double v : w.data()) CHECK(v == doctest::Approx(1.0));

  // output length tracks the query length, whatever Mk is
  auto kv9 = testing::rand_arr(rng, {1, 9, 8});
  CHECK(blk.cross_attn(q1, kv9).shape() == nd::Shape{1, 4, 8});

  auto ref = oracle_mha(blk, q1.data(), 4, kv9.data(), 9);
  auto y2 = blk.cross_attn(q1, kv9);
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK(std::abs(y2.data()[i] - ref[i]) < 1e-12);
}

TEST_CASE("attention weight rows sum to one") {
  Rng rng(41);
  attn::MultiHeadAttention blk({8, 4}, rng);
  auto q = testing::rand_arr(rng, {2, 5, 8}, -5.0, 5.0);
  auto kv = testing::rand_arr(rng, {2, 7, 8}, -5.0, 5.0);
  Array w;
  blk.cross_attn(q, kv, &w);
  int64_t rows = 2 * 4 * 5, mk = 7;
  for (int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int64_t j = 0; j < mk; ++j) s += w.data()[size_t(r * mk + j)];
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("set-attention property: no positional information") {
  Rng rng(53);
  attn::MultiHeadAttention blk({8, 2}, rng);
  int64_t M = 5, D = 8;
  auto x = testing::rand_arr(rng, {1, M, D});
  // a fixed permutation of the sequence positions
  std::vector<int64_t> perm = {3, 0, 4, 1, 2};
  auto px = Array::zeros({1, M, D});
  for (int64_t t = 0; t < M; ++t)
    for (int64_t c = 0; c < D; ++c)
      px.mutable_data()[size_t(t * D + c)] = x.data()[size_t(perm[size_t(t)] * D + c)];

  // permuting inputs permutes self-attention outputs the same way
  auto y = blk.self_attn(x);
  auto py = blk.self_attn(px);
  for (int64_t t = 0; t < M; ++t)
    for (int64_t c = 0; c < D; ++c)
      CHECK(py.data()[size_t(t * D + c)] ==
            doctest::Approx(y.data()[size_t(perm[size_t(t)] * D + c)]).epsilon(1e-12));

  // permuting key/value positions changes nothing in cross-attention
  auto q = testing::rand_arr(rng, {1, 3, D});
  auto out_a = blk.cross_attn(q, x);
  auto out_b = blk.cross_attn(q, px);
  for (size_t i = 0; i < out_a.data().size(); ++i)
    CHECK(std::abs(out_a.data()[i] - out_b.data()[i]) < 1e-12);
}

TEST_CASE("grad_check through both attention blocks") {
  Rng rng(67);
  attn::MultiHeadAttention blk({4, 2}, rng);
  nn::ParamMap pm;
  blk.params("attn", pm);

  {
    std::vector<Array> inputs = {testing::rand_arr(rng, {1, 3, 4})};
    for (auto& [name, arr] : pm.items()) inputs.push_back(arr);
    double err = nd::grad_check(
        [&](std::vector<Array>& in) {
          auto y = blk.self_attn(in[0]);
          return nd::mean(nd::mul(y, y));
        },
        inputs);
    CHECK(err < 1e-4);
  }
  {
    std::vector<Array> inputs = {testing::rand_arr(rng, {1, 2, 4}),
                                 testing::rand_arr(rng, {1, 4, 4})};
    for (auto& [name, arr] : pm.items()) inputs.push_back(arr);
    double err = nd::grad_check(
        [&](std::vector<Array>& in) {
          auto y = blk.cross_attn(in[0], in[1]);
          return nd::mean(nd::mul(y, y));
        },
        inputs);
    CHECK(err < 1e-4);
  }
}
