#pragma once

#include <vector>

#include "mtk/motion.hpp"
#include "mtk/nn.hpp"

// Evaluation stack: Frechet gesture distance over learned clip features,
// diversity, beat extraction and constancy, and the face-channel MSE / LVD
// pair. Everything here is a pure function of its inputs.

namespace mtk::metrics {

struct GaussianStats {
  std::vector<double> mu;     // (d)
  std::vector<double> sigma;  // (d*d) row-major, symmetric, population covariance
  int64_t dim = 0;
};

GaussianStats fit_gaussian(const std::vector<std::vector<double>>& samples);

// Cyclic Jacobi eigendecomposition for symmetric matrices. `a` holds the
// matrix on entry and the eigenvectors (columns) on exit; `w` the values.
void sym_eig(int64_t n, std::vector<double>& a, std::vector<double>& w);

// ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}), matrix square root
// via the symmetrized product S_r^{1/2} S_g S_r^{1/2}; 1e-6 added to the
// diagonals, small negative results clamped to zero.
double fgd(const std::vector<std::vector<double>>& real,
           const std::vector<std::vector<double>>& gen);

// --- clip feature extractor (for FGD) ---------------------------------------

struct FeatureConfig {
  int64_t latent = 32;
  int64_t hidden = 48;
  int64_t epochs = 8;
  int64_t batch = 2;
  double lr = 2.5e-4;
  uint64_t seed = 1;
};

// Small convolutional autoencoder over the body channels (rotations,
// contacts, translation). The pooled bottleneck is the clip feature.
class FeatureExtractor {
 public:
  FeatureExtractor(const FeatureConfig& cfg, Rng& rng);

  // per-clip pooled latent; deterministic
  std::vector<double> features(const motion::MotionSequence& clip) const;
  nd::Array encode(const nd::Array& body) const;  // (B, T16, Dbody) -> (B, T16/16, latent)
  nd::Array decode(const nd::Array& z) const;
  void params(nn::ParamMap& pm) const;
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  const FeatureConfig& config() const { return cfg_; }

 private:
  FeatureConfig cfg_;
  nn::Conv1d e1_, e2_, e3_;
  nn::Conv1d d1_, d2_, d3_;
  bool trained_ = false;
};

struct FeatureTrainResult {
  FeatureExtractor model;
  double recon_l1 = 0;   // held-in reconstruction L1 after training
  double corpus_std = 0; // std of the body channels it was trained on
};

FeatureTrainResult train_feature_extractor(
    const std::vector<motion::MotionSequence>& clips, const FeatureConfig& cfg);

// --- remaining metrics -------------------------------------------------------

// normalized mean pairwise L1 over ordered clip pairs, translation zeroed:
// 1/(2N(N-1)) sum_i sum_j ||p_i - p_j||_1
double diversity(const std::vector<motion::MotionSequence>& clips);

struct BeatSet {
  std::vector<double> times;  // seconds, strictly increasing
};

// strict local minima of the mean upper-body joint velocity, below the
// sequence's median speed
BeatSet motion_beats(const motion::MotionSequence& m);

// onset peaks of the half-wave-rectified envelope difference above
// median + 3*MAD
BeatSet audio_beats(const std::vector<double>& samples, int64_t rate);

// mean over gesture beats of exp(-min_a (b_g - b_a)^2 / (2 sigma^2));
// rejects empty beat sets
double beat_constancy(const BeatSet& gesture, const BeatSet& audio, double sigma = 0.1);

// raw aligned-buffer forms used by the face-channel wrappers below
double vertex_mse(const std::vector<double>& f, const std::vector<double>& f_hat);
// mean L1 between first temporal differences; frames x dims layout
double lvd(const std::vector<double>& f, const std::vector<double>& f_hat,
           int64_t frames, int64_t dims);

// face-channel ("vertex" proxy) comparisons between two full-body sequences
double vertex_mse(const motion::MotionSequence& a, const motion::MotionSequence& b);
double lvd(const motion::MotionSequence& a, const motion::MotionSequence& b);

}  // namespace mtk::metrics
