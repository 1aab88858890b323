#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "grad_registry.hpp"
#include "mtk/array.hpp"
#include "mtk/optim.hpp"

using namespace mtk;
using nd::Array;

TEST_CASE("elementwise analytic values") {
  auto sp = nd::softplus(Array::scalar(0.0));
  CHECK(sp.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  auto si = nd::silu(Array::scalar(0.0));
  CHECK(si.item() == doctest::Approx(0.0));

  auto x = Array::from({2}, {0.0, 1.0}, true);
  auto y = nd::exp(x);
  CHECK(y.data()[0] == doctest::Approx(1.0));
  CHECK(y.data()[1] == doctest::Approx(std::exp(1.0)));
  nd::backward(nd::sum(y));
  CHECK(x.grad()[0] == doctest::Approx(1.0));
  CHECK(x.grad()[1] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("broadcast rules") {
  auto a = Array::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Array::from({3}, {10, 20, 30});
  auto c = nd::add(a, b);
  CHECK(c.data() == std::vector<double>{11, 22, 33, 14, 25, 36});

  auto bad = Array::from({2}, {1, 2});
  CHECK_THROWS_WITH_AS(nd::add(a, bad),
                       doctest::Contains("(2,3)"), std::invalid_argument);
}

TEST_CASE("matmul identity and mismatch") {
  Array id3 = Array::zeros({3, 3});
  for (int i = 0; i < 3; ++i) id3.mutable_data()[size_t(i * 3 + i)] = 1.0;
  Rng rng(7);
  auto m = testing::rand_arr(rng, {3, 5});
  auto out = nd::matmul(id3, m);
  for (size_t i = 0; i < m.data().size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(m.data()[i]).epsilon(1e-15));

  auto bad = testing::rand_arr(rng, {4, 2});
  CHECK_THROWS_AS(nd::matmul(id3, bad), std::invalid_argument);
}

TEST_CASE("softmax basics") {
  auto s = nd::softmax(Array::from({2}, {0.0, 0.0}), 0);
  CHECK(s.data()[0] == doctest::Approx(0.5));
  CHECK(s.data()[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(nd::softmax(Array::zeros({2, 0}), 1), std::invalid_argument);
}

TEST_CASE("softmax rows are a distribution") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = testing::rand_arr(rng, {4, 7}, -30.0, 30.0);
    auto y = nd::softmax(x, -1);
    for (int64_t r = 0; r < 4; ++r) {
      double row = 0.0;
      for (int64_t k = 0; k < 7; ++k) {
        double v = y.data()[size_t(r * 7 + k)];
        CHECK(v >= 0.0);
        row += v;
      }
      CHECK(std::abs(row - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("conv1d output length and reference match") {
  Rng rng(3);
  auto x = testing::rand_arr(rng, {1, 8, 2});
  auto w = testing::rand_arr(rng, {3, 2, 4});
  auto b = testing::rand_arr(rng, {4});
  auto y = nd::conv1d(x, w, b, 1, 1, 1);
  CHECK(y.shape() == nd::Shape{1, 8, 4});

  // nested-loop reference
  for (int trial = 0; trial < 5; ++trial) {
    int64_t T = 5 + int64_t(rng.below(6)), cin = 1 + int64_t(rng.below(3));
    int64_t K = 1 + int64_t(rng.below(4)), cout = 1 + int64_t(rng.below(3));
    int64_t stride = 1 + int64_t(rng.below(2)), pad = int64_t(rng.below(3));
    if (T + 2 * pad < K) continue;
    auto xi = testing::rand_arr(rng, {2, T, cin});
    auto wi = testing::rand_arr(rng, {K, cin, cout});
    auto bi = testing::rand_arr(rng, {cout});
    auto yi = nd::conv1d(xi, wi, bi, stride, pad, pad);
    int64_t t_out = (T + 2 * pad - K) / stride + 1;
    REQUIRE(yi.shape() == nd::Shape{2, t_out, cout});
    for (int64_t bb = 0; bb < 2; ++bb)
      for (int64_t t = 0; t < t_out; ++t)
        for (int64_t co = 0; co < cout; ++co) {
          double acc = bi.data()[size_t(co)];
          for (int64_t k = 0; k < K; ++k) {
            int64_t src = t * stride - pad + k;
            if (src < 0 || src >= T) continue;
            for (int64_t ci = 0; ci < cin; ++ci)
              acc += xi.data()[size_t((bb * T + src) * cin + ci)] *
                     wi.data()[size_t((k * cin + ci) * cout + co)];
          }
          CHECK(std::abs(acc - yi.data()[size_t((bb * t_out + t) * cout + co)]) < 1e-12);
        }
  }
}

TEST_CASE("losses") {
  Rng rng(5);
  auto x = testing::rand_arr(rng, {3, 3});
  CHECK(nd::mse(x, x).item() == doctest::Approx(0.0));

  auto logp = nd::log_softmax(Array::zeros({1, 256}), -1);
  CHECK(nd::nll(logp, {17}).item() == doctest::Approx(std::log(256.0)).epsilon(1e-12));

  auto l = nd::l1(Array::from({2}, {1, 2}), Array::from({2}, {0, 0}));
  CHECK(l.item() == doctest::Approx(1.5));

  CHECK_THROWS_AS(nd::nll(logp, {256}), std::invalid_argument);
}

TEST_CASE("backward basics") {
  auto x = Array::scalar(3.0, true);
  auto y = nd::mul(x, x);
  nd::backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0));

  auto z = Array::scalar(1.5, true);
  auto w = nd::add(z, z);  // fan-out accumulation
  nd::backward(w);
  CHECK(z.grad()[0] == doctest::Approx(2.0));

  CHECK_THROWS_AS(nd::backward(Array::from({2}, {1, 2}, true)), std::invalid_argument);
}

TEST_CASE("backward twice doubles leaf gradients") {
  auto x = Array::from({3}, {1.0, -2.0, 0.5}, true);
  auto loss = nd::sum(nd::mul(x, nd::silu(x)));
  nd::backward(loss);
  auto once = x.grad();
  nd::backward(loss);
  for (size_t i = 0; i < once.size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}

TEST_CASE("grad_check on simple functions") {
  Rng rng(23);
  {
    std::vector<Array> in = {testing::rand_arr(rng, {6}, -2.0, 2.0)};
    double err = nd::grad_check(
        [](std::vector<Array>& x) { return nd::sum(nd::silu(x[0])); }, in);
    CHECK(err < 1e-6);
  }
  {
    std::vector<Array> in = {testing::rand_arr(rng, {5})};
    auto target = testing::rand_arr(rng, {5}, 0.0, 1.0);
    double err = nd::grad_check(
        [&](std::vector<Array>& x) { return nd::mse(nd::softmax(x[0], 0), target); },
        in);
    CHECK(err < 1e-6);
  }
  {
    std::vector<Array> in = {testing::rand_arr(rng, {4})};
    double err = nd::grad_check(
        [](std::vector<Array>&) { return Array::scalar(2.5); }, in);
    CHECK(err == doctest::Approx(0.0));
  }
}

TEST_CASE("every differentiable primitive passes grad_check on 20 seeds") {
  auto cases = testing::grad_cases();
  for (const auto& c : cases) {
    double worst = 0.0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(seed * 7919);
      std::vector<Array> inputs;
      auto fn = c.make(rng, inputs);
      worst = std::max(worst, nd::grad_check(fn, inputs));
    }
    INFO("primitive: ", c.name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("adam clipping and updates") {
  // global norm 9.9 scaled down to 0.99
  auto p1 = Array::from({2}, {0.0, 0.0}, true);
  auto p2 = Array::from({1}, {0.0}, true);
  p1.mutable_grad() = {9.9 * 0.6, 9.9 * 0.8};  // norm contribution 9.9 along (0.6,0.8)
  p2.mutable_grad() = {0.0};
  std::vector<Array> params = {p1, p2};
  CHECK(global_grad_norm(params) == doctest::Approx(9.9));
  clip_global_norm(params, 0.99);
  CHECK(global_grad_norm(params) == doctest::Approx(0.99).epsilon(1e-12));

  // zero gradients leave parameters unchanged
  auto q = Array::from({3}, {1.0, -2.0, 0.25}, true);
  q.zero_grad();
  Adam opt({q});
  opt.step();
  CHECK(q.data() == std::vector<double>{1.0, -2.0, 0.25});

  // one step against the hand-evaluated Adam formula
  auto r = Array::scalar(1.0, true);
  r.mutable_grad() = {0.5};
  AdamConfig cfg;
  Adam opt2({r}, cfg);
  opt2.step();
  double m = (1.0 - cfg.beta1) * 0.5;
  double v = (1.0 - cfg.beta2) * 0.25;
  double mhat = m / (1.0 - cfg.beta1);
  double vhat = v / (1.0 - cfg.beta2);
  double expect = 1.0 - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  CHECK(r.data()[0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("no-grad guard skips recording") {
  auto x = Array::scalar(2.0, true);
  {
    nd::NoGradGuard guard;
    auto y = nd::mul(x, x);
    CHECK_FALSE(static_cast<bool>(y.node()->backward));
  }
  auto y2 = nd::mul(x, x);
  CHECK(static_cast<bool>(y2.node()->backward));
}

TEST_CASE("detach stops gradients") {
  auto x = Array::scalar(3.0, true);
  auto y = nd::mul(nd::detach(x), x);  // d/dx = detach(x) only
  nd::backward(y);
  CHECK(x.grad()[0] == doctest::Approx(3.0));
}
