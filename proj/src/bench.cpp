#include "mtk/bench.hpp"

#include <chrono>
#include <cstdlib>
#include <algorithm>
#include <cmath>

#include "mtk/ssm.hpp"

namespace mtk::bench {

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double ss_residual(const std::vector<double>& y, const std::vector<double>& fit) {
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    double d = y[i] - fit[i];
    acc += d * d;
  }
  return acc;
}

double ss_total(const std::vector<double>& y) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= double(y.size());
  double acc = 0.0;
  for (double v : y) acc += (v - mean) * (v - mean);
  return acc;
}

// solve the k x k normal equations by Gaussian elimination
std::vector<double> solve_normal(std::vector<double> a, std::vector<double> b, int64_t k) {
  for (int64_t col = 0; col < k; ++col) {
    int64_t pivot = col;
    for (int64_t r = col + 1; r < k; ++r)
      if (std::abs(a[size_t(r * k + col)]) > std::abs(a[size_t(pivot * k + col)])) pivot = r;
    for (int64_t c = 0; c < k; ++c)
      std::swap(a[size_t(col * k + c)], a[size_t(pivot * k + c)]);
    std::swap(b[size_t(col)], b[size_t(pivot)]);
    double diag = a[size_t(col * k + col)];
    for (int64_t r = 0; r < k; ++r) {
      if (r == col) continue;
      double f = a[size_t(r * k + col)] / diag;
      for (int64_t c = 0; c < k; ++c) a[size_t(r * k + c)] -= f * a[size_t(col * k + c)];
      b[size_t(r)] -= f * b[size_t(col)];
    }
  }
  std::vector<double> x(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i) x[size_t(i)] = b[size_t(i)] / a[size_t(i * k + i)];
  return x;
}

double r2_poly(const std::vector<double>& x, const std::vector<double>& y, int64_t degree) {
  int64_t k = degree + 1;
  std::vector<double> a(static_cast<size_t>(k * k), 0.0), b(static_cast<size_t>(k), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    double powi = 1.0;
    std::vector<double> powers(static_cast<size_t>(2 * k - 1));
    for (int64_t p = 0; p < 2 * k - 1; ++p) {
      powers[size_t(p)] = powi;
      powi *= x[i];
    }
    for (int64_t r = 0; r < k; ++r) {
      for (int64_t c = 0; c < k; ++c) a[size_t(r * k + c)] += powers[size_t(r + c)];
      b[size_t(r)] += powers[size_t(r)] * y[i];
    }
  }
  auto coef = solve_normal(std::move(a), std::move(b), k);
  std::vector<double> fit(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    double powi = 1.0;
    for (int64_t p = 0; p < k; ++p) {
      fit[i] += coef[size_t(p)] * powi;
      powi *= x[i];
    }
  }
  double sst = ss_total(y);
  if (sst == 0.0) return 1.0;
  return 1.0 - ss_residual(y, fit) / sst;
}

}  // namespace

double r2_linear(const std::vector<double>& x, const std::vector<double>& y) {
  return r2_poly(x, y, 1);
}

double r2_quadratic(const std::vector<double>& x, const std::vector<double>& y) {
  return r2_poly(x, y, 2);
}

std::vector<TimingRow> time_scan(const std::vector<int64_t>& lengths,
                                 int64_t repeats, int64_t dim_e, int64_t dim_n,
                                 uint64_t seed) {
  std::vector<TimingRow> rows;
  Rng rng(seed);
  double sink = 0.0;
  for (int64_t m : lengths) {
    std::vector<double> a_bar(static_cast<size_t>(m * dim_e * dim_n));
    std::vector<double> b_bar(static_cast<size_t>(m * dim_e * dim_n));
    std::vector<double> c(static_cast<size_t>(m * dim_n));
    std::vector<double> x(static_cast<size_t>(m * dim_e));
    for (auto& v : a_bar) v = rng.uniform(0.1, 0.99);
    for (auto& v : b_bar) v = rng.uniform(-1, 1);
    for (auto& v : c) v = rng.uniform(-1, 1);
    for (auto& v : x) v = rng.uniform(-1, 1);
    std::vector<double> h(static_cast<size_t>(dim_e * dim_n));
    std::vector<double> y(static_cast<size_t>(m * dim_e));
    // warmup
    sink += ssm::scan_kernel(m, dim_e, dim_n, a_bar.data(), b_bar.data(), c.data(),
                             x.data(), h.data(), y.data());
    std::vector<double> times;
    for (int64_t r = 0; r < repeats; ++r) {
      double t0 = now_s();
      sink += ssm::scan_kernel(m, dim_e, dim_n, a_bar.data(), b_bar.data(), c.data(),
                               x.data(), h.data(), y.data());
      times.push_back(now_s() - t0);
    }
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= double(times.size());
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    std::sort(times.begin(), times.end());
    double median = times.size() % 2 ? times[times.size() / 2]
                                     : 0.5 * (times[times.size() / 2 - 1] +
                                              times[times.size() / 2]);
    rows.push_back({m, mean, std::sqrt(var / double(times.size())), median});
  }
  if (sink == 0.12345) std::abort();  // keep the kernel calls observable
  return rows;
}

std::vector<TimingRow> time_attention(const std::vector<int64_t>& lengths,
                                      int64_t repeats, int64_t dim, uint64_t seed) {
  std::vector<TimingRow> rows;
  Rng rng(seed);
  double sink = 0.0;
  for (int64_t m : lengths) {
    std::vector<double> q(static_cast<size_t>(m * dim));
    std::vector<double> k(static_cast<size_t>(m * dim));
    std::vector<double> v(static_cast<size_t>(m * dim));
    for (auto& a : q) a = rng.uniform(-1, 1);
    for (auto& a : k) a = rng.uniform(-1, 1);
    for (auto& a : v) a = rng.uniform(-1, 1);
    std::vector<double> scores(static_cast<size_t>(m));
    std::vector<double> out(static_cast<size_t>(m * dim));
    double scale = 1.0 / std::sqrt(double(dim));
    auto pass = [&]() {
      for (int64_t i = 0; i < m; ++i) {
        double mx = -1e300;
        for (int64_t j = 0; j < m; ++j) {
          double s = 0.0;
          const double* qi = q.data() + i * dim;
          const double* kj = k.data() + j * dim;
          for (int64_t c = 0; c < dim; ++c) s += qi[c] * kj[c];
          scores[size_t(j)] = s * scale;
          mx = std::max(mx, scores[size_t(j)]);
        }
        double denom = 0.0;
        for (int64_t j = 0; j < m; ++j) {
          scores[size_t(j)] = std::exp(scores[size_t(j)] - mx);
          denom += scores[size_t(j)];
        }
        double* oi = out.data() + i * dim;
        for (int64_t c = 0; c < dim; ++c) oi[c] = 0.0;
        for (int64_t j = 0; j < m; ++j) {
          double w = scores[size_t(j)] / denom;
          const double* vj = v.data() + j * dim;
          for (int64_t c = 0; c < dim; ++c) oi[c] += w * vj[c];
        }
      }
      return out[0];
    };
    sink += pass();  // warmup
    std::vector<double> times;
    for (int64_t r = 0; r < repeats; ++r) {
      double t0 = now_s();
      sink += pass();
      times.push_back(now_s() - t0);
    }
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= double(times.size());
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    std::sort(times.begin(), times.end());
    double median = times.size() % 2 ? times[times.size() / 2]
                                     : 0.5 * (times[times.size() / 2 - 1] +
                                              times[times.size() / 2]);
    rows.push_back({m, mean, std::sqrt(var / double(times.size())), median});
  }
  if (sink == 0.12345) std::abort();  // keep the kernel calls observable
  return rows;
}

ScalingReport scaling_report(const std::vector<int64_t>& lengths, int64_t repeats,
                             uint64_t seed) {
  ScalingReport rep;
  rep.scan = time_scan(lengths, repeats, 32, 8, seed);
  rep.attention = time_attention(lengths, repeats, 8, seed + 1);
  std::vector<double> xs, scan_y, attn_y;
  for (size_t i = 0; i < lengths.size(); ++i) {
    xs.push_back(double(lengths[i]));
    scan_y.push_back(rep.scan[i].median_s);
    attn_y.push_back(rep.attention[i].median_s);
  }
  rep.scan_r2_linear = r2_linear(xs, scan_y);
  rep.scan_r2_quadratic = r2_quadratic(xs, scan_y);
  rep.attn_r2_linear = r2_linear(xs, attn_y);
  rep.attn_r2_quadratic = r2_quadratic(xs, attn_y);
  return rep;
}

std::vector<ModuleRow> module_report(const synth::Generator& gen,
                                     const std::array<vq::VqVae, 4>& vqs,
                                     const std::vector<double>& audio,
                                     const std::vector<int64_t>& tokens,
                                     int64_t speaker, int64_t repeats) {
  double seconds = double(gen.config().frames) / double(gen.config().fps);
  std::vector<std::vector<double>> samples(9);
  for (int64_t r = 0; r < repeats; ++r) {
    synth::GenerationTiming tm;
    synth::generate(gen, vqs, audio, tokens, speaker, &tm);
    // order mirrors the per-module time table: face, hand, upper, lower decoders
    double vals[9] = {tm.audio_s,       tm.text_s,        tm.global_s,
                      tm.local_s,       tm.decode_s[0],   tm.decode_s[2],
                      tm.decode_s[1],   tm.decode_s[3],   tm.total_s};
    for (size_t i = 0; i < 9; ++i) samples[i].push_back(vals[i] / seconds);
  }
  const char* names[9] = {"Audio Encoders", "Text Encoders",  "Global Scan",
                          "Local Scan",     "Face VQDecoder", "Hand VQDecoder",
                          "Upper VQDecoder", "Lower VQDecoder", "Total Time"};
  std::vector<ModuleRow> rows;
  for (size_t i = 0; i < 9; ++i) {
    double mean = 0.0;
    for (double v : samples[i]) mean += v;
    mean /= double(samples[i].size());
    double var = 0.0;
    for (double v : samples[i]) var += (v - mean) * (v - mean);
    rows.push_back({names[i], mean, std::sqrt(var / double(samples[i].size()))});
  }
  return rows;
}

}  // namespace mtk::bench
