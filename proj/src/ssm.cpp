#include "mtk/ssm.hpp"

#include <cmath>
#include <stdexcept>

namespace mtk::ssm {

SsmCore::SsmCore(int64_t e, int64_t n, Rng& rng)
    : dim_e(e),
      dim_n(n),
      proj_b(e, n, rng, false),
      proj_c(e, n, rng, false),
      proj_delta(e, e, rng, false) {
  // A = -exp(a_log) with rows log(1..N): classic real-valued structured init
  std::vector<double> init(static_cast<size_t>(e * n));
  for (int64_t i = 0; i < e; ++i)
    for (int64_t j = 0; j < n; ++j)
      init[size_t(i * n + j)] = std::log(double(j + 1));
  a_log = Array::from({e, n}, std::move(init), true);
  delta_bias = Array::zeros({e}, true);
}

void SsmCore::params(const std::string& prefix, nn::ParamMap& pm) const {
  pm.add(prefix + ".a_log", a_log);
  proj_b.params(prefix + ".proj_b", pm);
  proj_c.params(prefix + ".proj_c", pm);
  proj_delta.params(prefix + ".proj_delta", pm);
  pm.add(prefix + ".delta_bias", delta_bias);
}

Selected select_parameters(const Array& x, const SsmCore& core) {
  Selected s;
  s.delta = nd::softplus(nd::add(core.proj_delta(x), core.delta_bias));
  s.b = core.proj_b(x);
  s.c = core.proj_c(x);
  return s;
}

Discretized discretize(const Array& delta, const Array& a, const Array& b_mat,
                       Discretization mode) {
  if (delta.ndim() != 3 || b_mat.ndim() != 3 || a.ndim() != 2)
    throw std::invalid_argument("discretize expects delta (B,M,E), a (E,N), b (B,M,N)");
  for (double d : delta.data())
    if (!(d > 0.0))
      throw std::invalid_argument("discretize: delta must be strictly positive");
  int64_t B = delta.dim(0), M = delta.dim(1), E = delta.dim(2);
  int64_t N = a.dim(1);
  Array d4 = nd::reshape(delta, {B, M, E, 1});
  Array a4 = nd::reshape(a, {1, 1, E, N});
  Array b4 = nd::reshape(b_mat, {B, M, 1, N});
  Array z = nd::mul(d4, a4);  // (B,M,E,N)
  Discretized out;
  out.a_bar = nd::exp(z);
  Array db = nd::mul(d4, b4);  // delta (x) B, broadcast outer product
  if (mode == Discretization::euler) {
    out.b_bar = db;
  } else {
    out.b_bar = nd::mul(nd::phi1(z), db);
  }
  return out;
}

Array scan(const Array& a_bar, const Array& b_bar, const Array& c_mat, const Array& x) {
  if (a_bar.ndim() != 4) throw std::invalid_argument("scan: a_bar must be (B,M,E,N)");
  int64_t B = a_bar.dim(0), M = a_bar.dim(1), E = a_bar.dim(2), N = a_bar.dim(3);
  if (b_bar.shape() != a_bar.shape())
    throw std::invalid_argument("scan: b_bar shape mismatch");
  if (c_mat.shape() != nd::Shape{B, M, N})
    throw std::invalid_argument("scan: c must be (B,M,N)");
  if (x.shape() != nd::Shape{B, M, E})
    throw std::invalid_argument("scan: x must be (B,M,E)");

  const auto& av = a_bar.data();
  const auto& bv = b_bar.data();
  const auto& cv = c_mat.data();
  const auto& xv = x.data();

  std::vector<double> y(static_cast<size_t>(B * M * E), 0.0);
  // full hidden trajectory kept for the reverse sweep
  auto h_store = std::make_shared<std::vector<double>>(
      static_cast<size_t>(B * M * E * N), 0.0);
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t t = 0; t < M; ++t) {
      const double* at = av.data() + ((b * M + t) * E) * N;
      const double* bt = bv.data() + ((b * M + t) * E) * N;
      const double* ct = cv.data() + (b * M + t) * N;
      const double* xt = xv.data() + (b * M + t) * E;
      double* ht = h_store->data() + ((b * M + t) * E) * N;
      const double* hprev = t > 0 ? h_store->data() + ((b * M + t - 1) * E) * N : nullptr;
      double* yt = y.data() + (b * M + t) * E;
      for (int64_t e = 0; e < E; ++e) {
        double xe = xt[e];
        double acc = 0.0;
        const double* ae = at + e * N;
        const double* be = bt + e * N;
        double* he = ht + e * N;
        if (hprev) {
          const double* hp = hprev + e * N;
          for (int64_t n = 0; n < N; ++n) {
            double h = ae[n] * hp[n] + be[n] * xe;
            he[n] = h;
            acc += ct[n] * h;
          }
        } else {
          for (int64_t n = 0; n < N; ++n) {
            double h = be[n] * xe;
            he[n] = h;
            acc += ct[n] * h;
          }
        }
        yt[e] = acc;
      }
    }
  }

  auto an = a_bar.node();
  auto bn = b_bar.node();
  auto cn = c_mat.node();
  auto xn = x.node();
  return nd::custom_op(
      {B, M, E}, std::move(y), {a_bar, b_bar, c_mat, x},
      [an, bn, cn, xn, h_store, B, M, E, N](nd::detail::Node& self) {
        bool wa = an->needs_grad(), wb = bn->needs_grad();
        bool wc = cn->needs_grad(), wx = xn->needs_grad();
        std::vector<double> ga, gb, gc, gx;
        if (wa) ga.assign(an->value.size(), 0.0);
        if (wb) gb.assign(bn->value.size(), 0.0);
        if (wc) gc.assign(cn->value.size(), 0.0);
        if (wx) gx.assign(xn->value.size(), 0.0);
        std::vector<double> hbar(static_cast<size_t>(E * N));
        for (int64_t b = 0; b < B; ++b) {
          std::fill(hbar.begin(), hbar.end(), 0.0);
          for (int64_t t = M - 1; t >= 0; --t) {
            const double* gy = self.grad.data() + (b * M + t) * E;
            const double* ct = cn->value.data() + (b * M + t) * N;
            const double* ht = h_store->data() + ((b * M + t) * E) * N;
            const double* hp =
                t > 0 ? h_store->data() + ((b * M + t - 1) * E) * N : nullptr;
            const double* at = an->value.data() + ((b * M + t) * E) * N;
            const double* bt = bn->value.data() + ((b * M + t) * E) * N;
            const double* xt = xn->value.data() + (b * M + t) * E;
            double* gct = wc ? gc.data() + (b * M + t) * N : nullptr;
            for (int64_t e = 0; e < E; ++e) {
              double gye = gy[e];
              double* hb = hbar.data() + e * N;
              const double* he = ht + e * N;
              double gxe = 0.0;
              for (int64_t n = 0; n < N; ++n) {
                hb[n] += gye * ct[n];
                if (gct) gct[n] += gye * he[n];
                if (wa && hp) ga[size_t(((b * M + t) * E + e) * N + n)] = hb[n] * hp[e * N + n];
                if (wb) gb[size_t(((b * M + t) * E + e) * N + n)] = hb[n] * xt[e];
                gxe += hb[n] * bt[e * N + n];
                hb[n] *= at[e * N + n];
              }
              if (wx) gx[size_t((b * M + t) * E + e)] = gxe;
            }
          }
        }
        if (wa) nd::detail::accumulate(an, ga);
        if (wb) nd::detail::accumulate(bn, gb);
        if (wc) nd::detail::accumulate(cn, gc);
        if (wx) nd::detail::accumulate(xn, gx);
      });
}

MambaBlock::MambaBlock(int64_t d, int64_t e, int64_t n, Rng& rng)
    : dim_d(d),
      dim_e(e),
      dim_n(n),
      in_x(d, e, rng),
      in_z(d, e, rng),
      conv(e, e, /*kernel=*/4, /*stride=*/1, /*pad_l=*/3, /*pad_r=*/0, rng),
      core(e, n, rng),
      out(e, d, rng) {}

Array MambaBlock::operator()(const Array& tokens) const {
  Array xp = nd::silu(conv(in_x(tokens)));
  Array z = in_z(tokens);
  Selected sel = select_parameters(xp, core);
  Discretized disc = discretize(sel.delta, core.a(), sel.b, Discretization::euler);
  Array y = scan(disc.a_bar, disc.b_bar, sel.c, xp);
  Array gated = nd::mul(y, nd::silu(z));
  return nd::add(out(gated), tokens);
}

void MambaBlock::params(const std::string& prefix, nn::ParamMap& pm) const {
  in_x.params(prefix + ".in_x", pm);
  in_z.params(prefix + ".in_z", pm);
  conv.params(prefix + ".conv", pm);
  core.params(prefix + ".core", pm);
  out.params(prefix + ".out", pm);
}

double scan_kernel(int64_t m, int64_t e, int64_t n, const double* a_bar,
                   const double* b_bar, const double* c_mat, const double* x,
                   double* h, double* y) {
  std::fill(h, h + e * n, 0.0);
  double max_h = 0.0;
  for (int64_t t = 0; t < m; ++t) {
    const double* at = a_bar + (t * e) * n;
    const double* bt = b_bar + (t * e) * n;
    const double* ct = c_mat + t * n;
    const double* xt = x + t * e;
    double* yt = y + t * e;
    for (int64_t ei = 0; ei < e; ++ei) {
      double xe = xt[ei];
      double* he = h + ei * n;
      const double* ae = at + ei * n;
      const double* be = bt + ei * n;
      double acc = 0.0;
      if (t == 0) {
        for (int64_t ni = 0; ni < n; ++ni) {
          he[ni] = be[ni] * xe;
          acc += ct[ni] * he[ni];
          max_h = std::max(max_h, std::abs(he[ni]));
        }
      } else {
        for (int64_t ni = 0; ni < n; ++ni) {
          he[ni] = ae[ni] * he[ni] + be[ni] * xe;
          acc += ct[ni] * he[ni];
          max_h = std::max(max_h, std::abs(he[ni]));
        }
      }
      yt[ei] = acc;
    }
  }
  return max_h;
}

}  // namespace mtk::ssm
