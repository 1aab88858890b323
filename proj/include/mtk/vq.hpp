#pragma once

#include "mtk/motion.hpp"
#include "mtk/nn.hpp"

// Stage 1: discrete motion priors. One convolutional autoencoder per body
// part with a learned codebook in the bottleneck; training combines
// reconstruction, velocity and acceleration terms with the two stop-gradient
// codebook terms, and gradients cross the quantizer via the straight-through
// estimator.

namespace mtk::vq {

using nd::Array;

struct Codebook {
  Array entries;  // (N, C), initialized uniform in [-1/N, 1/N)

  Codebook() = default;
  Codebook(int64_t n, int64_t c, Rng& rng);
  int64_t size() const { return entries.dim(0); }
  int64_t width() const { return entries.dim(1); }
};

struct QuantizeResult {
  Array z_q;                 // same shape as the input, exact codebook rows
  std::vector<int64_t> idx;  // chosen index per latent vector, row-major
};

// Nearest codebook row by L2 distance; ties break to the lowest index. The
// returned z_q participates in the graph through the codebook entries only.
QuantizeResult quantize(const Array& z_hat, const Codebook& cb);

// Forward value z_q, backward passes the gradient to z_hat unchanged:
// z_hat + stop_gradient(z_q - z_hat).
Array straight_through(const Array& z_hat, const Array& z_q);

struct VqLossTerms {
  Array total;       // scalar, on the tape
  double rec = 0;    // geodesic on Rot6D channels + L1 on plain channels
  double contact = 0;  // extra MSE on foot-contact channels
  double vel = 0;
  double acc = 0;
  double codebook = 0;  // ||sg(z_hat) - z_q||^2 (mean)
  double commit = 0;    // ||z_hat - sg(z_q)||^2 (mean)
};

// m / m_hat: (B, T, Dp) part slices, T >= 3. `with_vel_acc` drops the
// velocity/acceleration terms (the smoothness ablation).
VqLossTerms vq_loss(const Array& m, const Array& m_hat, const Array& z_hat,
                    const Array& z_q, const motion::PartInfo& info,
                    bool with_vel_acc = true);

struct VqConfig {
  int64_t codebook_size = 64;    // N (full scale: 256)
  int64_t latent_channels = 32;  // C (full scale: 512)
  int64_t hidden = 64;
  int64_t epochs = 40;
  double lr = 2.5e-4;
  double lr_final = 2.5e-5;
  double lr_final_frac = 0.025;  // tail fraction of epochs at lr_final
  int64_t window = 64;           // frames per training window
  int64_t batch = 8;
  int64_t windows_per_epoch = 96;
  uint64_t seed = 1;
  bool vel_acc_terms = true;
};

inline constexpr int64_t kDownsample = 4;  // two stride-2 encoder convs

class VqVae {
 public:
  VqVae(motion::BodyPart part, const VqConfig& cfg, Rng& rng);

  // (B, T, Dp) -> (B, T/4, C); T must be divisible by 4
  Array encode(const Array& m) const;
  // (B, T', C) -> (B, 4*T', Dp)
  Array decode(const Array& z) const;

  motion::BodyPart part() const { return part_; }
  const motion::PartInfo& info() const { return info_; }
  const Codebook& codebook() const { return codebook_; }
  Codebook& codebook() { return codebook_; }
  const VqConfig& config() const { return cfg_; }

  void params(nn::ParamMap& pm) const;
  void set_trainable(bool trainable);

  void save(const std::string& path) const;
  static VqVae load(const std::string& path);

 private:
  motion::BodyPart part_;
  motion::PartInfo info_;
  VqConfig cfg_;
  nn::Conv1d enc1_, enc2_, enc3_;
  nn::Conv1d dec1_, dec2_, dec3_;
  Codebook codebook_;
};

struct VqEpochStats {
  double loss = 0;         // mean total over the epoch
  double rec = 0;          // mean reconstruction term (rec + contact)
  double utilization = 0;  // distinct codes used / N
};

struct VqTrainResult {
  VqVae model;
  std::vector<VqEpochStats> curve;
};

// Trains one part's autoencoder on full-body clips (the part slice is taken
// internally). Bit-deterministic for a fixed config.
VqTrainResult train_vqvae(const std::vector<motion::MotionSequence>& clips,
                          motion::BodyPart part, const VqConfig& cfg);

}  // namespace mtk::vq
