#include "mtk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtk/optim.hpp"

namespace mtk::metrics {

GaussianStats fit_gaussian(const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw std::invalid_argument("fit_gaussian: no samples");
  int64_t n = int64_t(samples.size());
  int64_t d = int64_t(samples[0].size());
  GaussianStats g;
  g.dim = d;
  g.mu.assign(size_t(d), 0.0);
  for (const auto& s : samples) {
    if (int64_t(s.size()) != d) throw std::invalid_argument("fit_gaussian: ragged samples");
    for (int64_t i = 0; i < d; ++i) g.mu[size_t(i)] += s[size_t(i)];
  }
  for (auto& v : g.mu) v /= double(n);
  g.sigma.assign(size_t(d * d), 0.0);
  for (const auto& s : samples)
    for (int64_t i = 0; i < d; ++i) {
      double di = s[size_t(i)] - g.mu[size_t(i)];
      for (int64_t j = i; j < d; ++j)
        g.sigma[size_t(i * d + j)] += di * (s[size_t(j)] - g.mu[size_t(j)]);
    }
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = i; j < d; ++j) {
      double v = g.sigma[size_t(i * d + j)] / double(n);  // population covariance
      g.sigma[size_t(i * d + j)] = v;
      g.sigma[size_t(j * d + i)] = v;
    }
  return g;
}

void sym_eig(int64_t n, std::vector<double>& a, std::vector<double>& w) {
  // cyclic Jacobi; a is overwritten with the eigenvectors (as columns)
  std::vector<double> v(size_t(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) v[size_t(i * n + i)] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int64_t p = 0; p < n; ++p)
      for (int64_t q = p + 1; q < n; ++q) off += a[size_t(p * n + q)] * a[size_t(p * n + q)];
    if (off < 1e-24) break;
    for (int64_t p = 0; p < n; ++p)
      for (int64_t q = p + 1; q < n; ++q) {
        double apq = a[size_t(p * n + q)];
        if (std::abs(apq) < 1e-300) continue;
        double app = a[size_t(p * n + p)], aqq = a[size_t(q * n + q)];
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int64_t k = 0; k < n; ++k) {
          double akp = a[size_t(k * n + p)], akq = a[size_t(k * n + q)];
          a[size_t(k * n + p)] = c * akp - s * akq;
          a[size_t(k * n + q)] = s * akp + c * akq;
        }
        for (int64_t k = 0; k < n; ++k) {
          double apk = a[size_t(p * n + k)], aqk = a[size_t(q * n + k)];
          a[size_t(p * n + k)] = c * apk - s * aqk;
          a[size_t(q * n + k)] = s * apk + c * aqk;
        }
        for (int64_t k = 0; k < n; ++k) {
          double vkp = v[size_t(k * n + p)], vkq = v[size_t(k * n + q)];
          v[size_t(k * n + p)] = c * vkp - s * vkq;
          v[size_t(k * n + q)] = s * vkp + c * vkq;
        }
      }
  }
  w.assign(size_t(n), 0.0);
  for (int64_t i = 0; i < n; ++i) w[size_t(i)] = a[size_t(i * n + i)];
  a = v;
}

namespace {

// B = A^{1/2} for symmetric PSD A (eigenvalues clamped at zero)
std::vector<double> sym_sqrt(int64_t n, std::vector<double> a) {
  std::vector<double> w;
  sym_eig(n, a, w);
  std::vector<double> out(size_t(n * n), 0.0);
  for (int64_t k = 0; k < n; ++k) {
    double s = std::sqrt(std::max(0.0, w[size_t(k)]));
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j)
        out[size_t(i * n + j)] += s * a[size_t(i * n + k)] * a[size_t(j * n + k)];
  }
  return out;
}

std::vector<double> matmul_sq(int64_t n, const std::vector<double>& x,
                              const std::vector<double>& y) {
  std::vector<double> out(size_t(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t k = 0; k < n; ++k) {
      double xik = x[size_t(i * n + k)];
      for (int64_t j = 0; j < n; ++j) out[size_t(i * n + j)] += xik * y[size_t(k * n + j)];
    }
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double fgd(const std::vector<std::vector<double>>& real,
           const std::vector<std::vector<double>>& gen) {
  if (real.empty() || gen.empty()) throw std::invalid_argument("fgd: empty sample set");
  GaussianStats r = fit_gaussian(real);
  GaussianStats g = fit_gaussian(gen);
  if (r.dim != g.dim) throw std::invalid_argument("fgd: feature dim mismatch");
  int64_t d = r.dim;
  for (int64_t i = 0; i < d; ++i) {
    r.sigma[size_t(i * d + i)] += 1e-6;
    g.sigma[size_t(i * d + i)] += 1e-6;
  }
  double mean_term = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    double diff = r.mu[size_t(i)] - g.mu[size_t(i)];
    mean_term += diff * diff;
  }
  // Tr((Sr Sg)^{1/2}) through the symmetric form Sr^{1/2} Sg Sr^{1/2}
  auto r_half = sym_sqrt(d, r.sigma);
  auto middle = matmul_sq(d, matmul_sq(d, r_half, g.sigma), r_half);
  // enforce symmetry against round-off before the second decomposition
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = i + 1; j < d; ++j) {
      double v = 0.5 * (middle[size_t(i * d + j)] + middle[size_t(j * d + i)]);
      middle[size_t(i * d + j)] = v;
      middle[size_t(j * d + i)] = v;
    }
  std::vector<double> w;
  sym_eig(d, middle, w);
  double tr_sqrt = 0.0;
  for (double lambda : w) tr_sqrt += std::sqrt(std::max(0.0, lambda));
  double tr_r = 0.0, tr_g = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    tr_r += r.sigma[size_t(i * d + i)];
    tr_g += g.sigma[size_t(i * d + i)];
  }
  double result = mean_term + tr_r + tr_g - 2.0 * tr_sqrt;
  return std::max(0.0, result);
}

// --- feature extractor -------------------------------------------------------

namespace {
constexpr int64_t kBodyDim = motion::kFaceBegin;  // rotations + contacts + translation
constexpr int64_t kPoolFactor = 16;               // two stride-4 encoder convs

// tape array of the leading body channels, truncated to a multiple of 16 frames
nd::Array body_array(const motion::MotionSequence& clip) {
  int64_t t16 = (clip.frames / kPoolFactor) * kPoolFactor;
  if (t16 < kPoolFactor)
    throw std::invalid_argument("feature extractor needs at least 16 frames");
  auto s = clip.slice_channels(0, kBodyDim);
  s.data.resize(size_t(t16 * kBodyDim));
  return nd::Array::from({1, t16, kBodyDim}, std::move(s.data));
}
}  // namespace

FeatureExtractor::FeatureExtractor(const FeatureConfig& cfg, Rng& rng)
    : cfg_(cfg),
      e1_(kBodyDim, cfg.hidden, 4, 4, 0, rng),
      e2_(cfg.hidden, cfg.hidden, 4, 4, 0, rng),
      e3_(cfg.hidden, cfg.latent, 3, 1, 1, rng),
      d1_(cfg.latent, cfg.hidden, 3, 1, 1, rng),
      d2_(cfg.hidden, cfg.hidden, 3, 1, 1, rng),
      d3_(cfg.hidden, kBodyDim, 3, 1, 1, rng) {}

nd::Array FeatureExtractor::encode(const nd::Array& body) const {
  auto x = nd::silu(e1_(body));
  x = nd::silu(e2_(x));
  return e3_(x);
}

nd::Array FeatureExtractor::decode(const nd::Array& z) const {
  auto x = nd::silu(d1_(z));
  x = nd::repeat_interleave(x, 1, 4);
  x = nd::silu(d2_(x));
  x = nd::repeat_interleave(x, 1, 4);
  return d3_(x);
}

std::vector<double> FeatureExtractor::features(const motion::MotionSequence& clip) const {
  if (!trained_)
    throw std::logic_error("feature extractor is untrained; run train_feature_extractor");
  nd::NoGradGuard guard;
  auto z = encode(body_array(clip));            // (1, T', latent)
  auto pooled = nd::mean_axis(z, 1, false);     // (1, latent)
  return pooled.data();
}

void FeatureExtractor::params(nn::ParamMap& pm) const {
  e1_.params("e1", pm);
  e2_.params("e2", pm);
  e3_.params("e3", pm);
  d1_.params("d1", pm);
  d2_.params("d2", pm);
  d3_.params("d3", pm);
}

FeatureTrainResult train_feature_extractor(
    const std::vector<motion::MotionSequence>& clips, const FeatureConfig& cfg) {
  if (clips.empty()) throw std::invalid_argument("train_feature_extractor: no clips");
  Rng rng(cfg.seed);
  FeatureTrainResult out{FeatureExtractor(cfg, rng), 0.0, 0.0};

  // corpus std over body channels, the yardstick for reconstruction quality
  double mean = 0.0;
  int64_t count = 0;
  for (const auto& c : clips)
    for (int64_t t = 0; t < c.frames; ++t)
      for (int64_t ch = 0; ch < kBodyDim; ++ch) {
        mean += c.at(t, ch);
        ++count;
      }
  mean /= double(count);
  double var = 0.0;
  for (const auto& c : clips)
    for (int64_t t = 0; t < c.frames; ++t)
      for (int64_t ch = 0; ch < kBodyDim; ++ch) {
        double d = c.at(t, ch) - mean;
        var += d * d;
      }
  out.corpus_std = std::sqrt(var / double(count));

  nn::ParamMap pm;
  out.model.params(pm);
  Adam opt(pm.arrays(), AdamConfig{cfg.lr});
  Rng order_rng = rng.fork("order");
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order(clips.size());
    for (size_t i = 0; i < clips.size(); ++i) order[i] = i;
    for (size_t i = clips.size() - 1; i > 0; --i)
      std::swap(order[i], order[order_rng.below(uint64_t(i + 1))]);
    for (size_t i = 0; i < order.size(); ++i) {
      auto body = body_array(clips[order[i]]);
      auto recon = out.model.decode(out.model.encode(body));
      auto loss = nd::l1(recon, body);
      opt.zero_grad();
      nd::backward(loss);
      opt.step();
    }
  }
  out.model.mark_trained();

  nd::NoGradGuard guard;
  double l1_sum = 0.0;
  for (const auto& c : clips) {
    auto body = body_array(c);
    auto recon = out.model.decode(out.model.encode(body));
    l1_sum += nd::l1(recon, body).item();
  }
  out.recon_l1 = l1_sum / double(clips.size());
  return out;
}

// --- diversity, beats, face metrics ------------------------------------------

double diversity(const std::vector<motion::MotionSequence>& clips) {
  int64_t n = int64_t(clips.size());
  if (n < 2) throw std::invalid_argument("diversity needs at least 2 clips");
  int64_t frames = clips[0].frames, dims = clips[0].dims;
  for (const auto& c : clips)
    if (c.frames != frames || c.dims != dims)
      throw std::invalid_argument("diversity: clips must share shape");
  // translation zeroed: local motion only
  auto zeroed = [&](const motion::MotionSequence& c) {
    std::vector<double> d = c.data;
    if (dims == motion::kFullDim)
      for (int64_t t = 0; t < frames; ++t)
        for (int64_t k = 0; k < motion::kTranslationDim; ++k)
          d[size_t(t * dims + motion::kTranslationBegin + k)] = 0.0;
    return d;
  };
  std::vector<std::vector<double>> p;
  p.reserve(size_t(n));
  for (const auto& c : clips) p.push_back(zeroed(c));
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double l1 = 0.0;
      for (size_t k = 0; k < p[size_t(i)].size(); ++k)
        l1 += std::abs(p[size_t(i)][k] - p[size_t(j)][k]);
      acc += l1;
    }
  return acc / (2.0 * double(n) * double(n - 1));
}

BeatSet motion_beats(const motion::MotionSequence& m) {
  if (m.frames < 3) throw std::invalid_argument("motion_beats: need at least 3 frames");
  // mean L2 joint velocity over the upper body (fingers excluded)
  int64_t joints = motion::kUpperJoints;
  std::vector<double> speed(size_t(m.frames - 1), 0.0);
  for (int64_t t = 0; t + 1 < m.frames; ++t) {
    double acc = 0.0;
    for (int64_t j = 0; j < joints; ++j) {
      double sq = 0.0;
      for (int64_t c = 0; c < 6; ++c) {
        double d = m.at(t + 1, motion::kUpperBegin + j * 6 + c) -
                   m.at(t, motion::kUpperBegin + j * 6 + c);
        sq += d * d;
      }
      acc += std::sqrt(sq);
    }
    speed[size_t(t)] = acc / double(joints);
  }
  double med = median_of(speed);
  BeatSet beats;
  for (size_t t = 1; t + 1 < speed.size(); ++t)
    if (speed[t] < speed[t - 1] && speed[t] < speed[t + 1] && speed[t] < med)
      beats.times.push_back((double(t) + 0.5) / m.fps);
  return beats;
}

BeatSet audio_beats(const std::vector<double>& samples, int64_t rate) {
  if (samples.empty()) throw std::invalid_argument("audio_beats: empty audio");
  int64_t hop = std::max<int64_t>(1, rate / 62);  // ~16 ms
  int64_t n = int64_t(samples.size()) / hop;
  BeatSet beats;
  if (n < 3) return beats;
  std::vector<double> env(size_t(n), 0.0);
  for (int64_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (int64_t k = 0; k < hop; ++k) acc += std::abs(samples[size_t(t * hop + k)]);
    env[size_t(t)] = acc / double(hop);
  }
  std::vector<double> onset(size_t(n - 1), 0.0);
  for (int64_t t = 0; t + 1 < n; ++t)
    onset[size_t(t)] = std::max(0.0, env[size_t(t + 1)] - env[size_t(t)]);
  double med = median_of(onset);
  std::vector<double> dev(onset.size());
  for (size_t i = 0; i < onset.size(); ++i) dev[i] = std::abs(onset[i] - med);
  double mad = median_of(dev);
  double threshold = med + 3.0 * mad;
  for (size_t t = 1; t + 1 < onset.size(); ++t)
    if (onset[t] > threshold && onset[t] > onset[t - 1] && onset[t] >= onset[t + 1] &&
        onset[t] > 0.0)
      beats.times.push_back((double(t) + 1.0) * double(hop) / double(rate));
  return beats;
}

double beat_constancy(const BeatSet& gesture, const BeatSet& audio, double sigma) {
  if (gesture.times.empty())
    throw std::invalid_argument("beat_constancy: no gesture beats");
  if (audio.times.empty())
    throw std::invalid_argument("beat_constancy: no audio beats");
  double acc = 0.0;
  for (double bg : gesture.times) {
    double best = 1e300;
    for (double ba : audio.times) best = std::min(best, (bg - ba) * (bg - ba));
    acc += std::exp(-best / (2.0 * sigma * sigma));
  }
  return acc / double(gesture.times.size());
}

double vertex_mse(const std::vector<double>& f, const std::vector<double>& f_hat) {
  if (f.size() != f_hat.size()) throw std::invalid_argument("vertex_mse: shape mismatch");
  if (f.empty()) throw std::invalid_argument("vertex_mse: empty input");
  double acc = 0.0;
  for (size_t i = 0; i < f.size(); ++i) {
    double d = f[i] - f_hat[i];
    acc += d * d;
  }
  return acc / double(f.size());
}

double lvd(const std::vector<double>& f, const std::vector<double>& f_hat,
           int64_t frames, int64_t dims) {
  if (f.size() != f_hat.size() || int64_t(f.size()) != frames * dims)
    throw std::invalid_argument("lvd: shape mismatch");
  if (frames < 2) throw std::invalid_argument("lvd: need at least 2 frames for speeds");
  double acc = 0.0;
  for (int64_t t = 0; t + 1 < frames; ++t)
    for (int64_t c = 0; c < dims; ++c) {
      double va = f[size_t((t + 1) * dims + c)] - f[size_t(t * dims + c)];
      double vb = f_hat[size_t((t + 1) * dims + c)] - f_hat[size_t(t * dims + c)];
      acc += std::abs(va - vb);
    }
  return acc / double((frames - 1) * dims);
}

double vertex_mse(const motion::MotionSequence& a, const motion::MotionSequence& b) {
  return vertex_mse(a.slice_channels(motion::kFaceBegin, motion::kFaceDim).data,
                    b.slice_channels(motion::kFaceBegin, motion::kFaceDim).data);
}

double lvd(const motion::MotionSequence& a, const motion::MotionSequence& b) {
  return lvd(a.slice_channels(motion::kFaceBegin, motion::kFaceDim).data,
             b.slice_channels(motion::kFaceBegin, motion::kFaceDim).data, a.frames,
             motion::kFaceDim);
}

}  // namespace mtk::metrics
