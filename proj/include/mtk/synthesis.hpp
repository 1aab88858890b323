#pragma once

#include <array>
#include <optional>

#include "mtk/attention.hpp"
#include "mtk/corpus.hpp"
#include "mtk/motion.hpp"
#include "mtk/ssm.hpp"
#include "mtk/vq.hpp"

// Stage 2: speech-conditioned gesture generation in the frozen stage-1
// latent space. Audio and text features are fused per channel by learned
// two-way gates, a global scan mixes learnable queries with the speech
// stream through attention and two selective-scan blocks, cross-attention
// refines the queries, and a per-part local scan emits each body part's
// latent prediction and code logits for the frozen VQ decoders.

namespace mtk::synth {

using nd::Array;

struct GeneratorConfig {
  int64_t model_dim = 64;  // D
  int64_t heads = 4;
  int64_t ssm_dim = 32;    // E
  int64_t ssm_state = 8;   // N
  int64_t latent_len = 60; // M, equals frames / 4
  int64_t frames = 240;    // T at motion fps
  int64_t vocab = 64;
  int64_t speakers = 2;
  int64_t text_embed = 32;
  int64_t fps = 30;

  // loss weights: alpha scales code classification, beta latent recovery
  std::array<double, 4> alpha = {0.0, 1.0, 1.0, 1.0};  // face, upper, hands, lower
  std::array<double, 4> beta = {3.0, 3.0, 3.0, 3.0};

  double mask_ratio = 1.0 / 3.0;
  int64_t epochs = 30;
  double lr = 2.5e-4;
  uint64_t seed = 1;
};

// per-frame amplitude envelope, window t covering samples [tS/N, (t+1)S/N)
std::vector<double> amplitude_envelope(const std::vector<double>& samples,
                                       int64_t frames);

// Two sub-encoders integrated along the channel dimension: the face half
// sees envelope features plus a strided conv stack over the raw samples,
// the body half sees envelope features only.
class AudioEncoder {
 public:
  AudioEncoder() = default;
  AudioEncoder(int64_t model_dim, Rng& rng);
  // -> (1, frames, D); rejects audio shorter than the frame span
  Array operator()(const std::vector<double>& samples, int64_t frames) const;
  void params(const std::string& prefix, nn::ParamMap& pm) const;

 private:
  int64_t dim_ = 0;
  nn::Conv1d raw1_, raw2_, raw3_;
  nn::Conv1d env1_, env2_;
  nn::Linear face_proj_, body_proj_;
};

class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(int64_t vocab, int64_t embed, int64_t model_dim, Rng& rng);
  Array operator()(const std::vector<int64_t>& tokens) const;  // (1, N, D)
  void params(const std::string& prefix, nn::ParamMap& pm) const;

 private:
  nn::Embedding table_;
  nn::Linear proj_;
};

// w_T = two-way softmax gates from [f_A + s_id, f_T + s_id]; the fused
// streams are elementwise convex combinations of f_A and f_T.
class FusionGate {
 public:
  FusionGate() = default;
  FusionGate(int64_t model_dim, Rng& rng);
  struct Fused {
    Array f_t;  // (1, N, D)
    Array f_a;  // (1, N, D)
  };
  Fused operator()(const Array& f_a, const Array& f_t, const Array& s_id) const;
  void params(const std::string& prefix, nn::ParamMap& pm) const;

 private:
  nn::Linear gate_t_, gate_a_;  // 2D -> 2D, reshaped to per-channel pairs
};

struct GlobalScanResult {
  Array f_global;      // (1, M, D) merged global features
  Array f_bar_global;  // (1, M, D) self-attended queries (speech-independent)
  Array f_speech;      // (1, 2N, D) scanned speech stream
};

class GlobalScan {
 public:
  GlobalScan() = default;
  GlobalScan(const GeneratorConfig& cfg, Rng& rng);
  GlobalScanResult operator()(const Array& fused_a, const Array& fused_t) const;
  const Array& queries() const { return q_global_; }
  void params(const std::string& prefix, nn::ParamMap& pm) const;

 private:
  Array q_global_;  // (M, D) learnable query tokens
  attn::MultiHeadAttention mhsa_;
  ssm::MambaBlock mamba_speech_, mamba_query_;
  nn::Linear merge_;  // 3D -> D after length alignment
  int64_t latent_len_ = 0;
};

struct LocalScanResult {
  std::array<Array, 4> latents;       // per part (1, M, C_o)
  std::array<Array, 4> logits;        // per part (1, M, N_o)
  std::array<Array, 4> part_streams;  // gated per-part streams (1, M, E)
  Array tokens_out;                   // (1, M, D)
};

// Per-part head widths for the local scan outputs.
struct PartHead {
  int64_t latent_channels = 0;  // C_o
  int64_t codes = 0;            // N_o
};

class LocalScan {
 public:
  LocalScan() = default;
  LocalScan(const GeneratorConfig& cfg, const std::array<PartHead, 4>& heads, Rng& rng);
  // mask, when given, zeroes the masked time rows of the input tokens
  LocalScanResult operator()(const Array& f_refine, const Array& f_global,
                             const std::vector<double>* mask) const;
  void params(const std::string& prefix, nn::ParamMap& pm) const;

 private:
  struct PartPath {
    std::optional<attn::MultiHeadAttention> mhsa;  // body parts only
    nn::Linear gate;  // D -> E
    nn::Conv1d conv;  // D -> E, causal
    ssm::SsmCore core;
    nn::Linear head_latent;  // D -> C_o
    nn::Linear head_logits;  // D -> N_o
  };
  std::array<PartPath, 4> parts_;
  nn::Linear merge_;  // E -> D
};

struct GeneratorLossTerms {
  Array total;  // scalar on the tape
  std::array<double, 4> cls = {};  // alpha-weighted per-part NLL
  std::array<double, 4> rec = {};  // beta-weighted per-part latent MSE
};

GeneratorLossTerms generator_loss(const LocalScanResult& out,
                                  const std::array<Array, 4>& target_latents,
                                  const std::array<std::vector<int64_t>, 4>& target_idx,
                                  const GeneratorConfig& cfg);

class Generator {
 public:
  Generator(const GeneratorConfig& cfg, const std::array<PartHead, 4>& heads, Rng& rng);

  struct Forward {
    Array f_a, f_t;
    FusionGate::Fused fused;
    GlobalScanResult global;
    Array f_refine;
    LocalScanResult local;
  };
  Forward forward(const std::vector<double>& audio, const std::vector<int64_t>& tokens,
                  int64_t speaker, const std::vector<double>* mask) const;

  const GeneratorConfig& config() const { return cfg_; }
  const std::array<PartHead, 4>& heads() const { return heads_; }
  void params(nn::ParamMap& pm) const;
  void save(const std::string& path) const;
  static Generator load(const std::string& path);

  // exposed pieces (tests reach through these)
  AudioEncoder audio_enc;
  TextEncoder text_enc;
  nn::Embedding speaker_table;  // (speakers, D)
  FusionGate fuse;
  GlobalScan global_scan;
  attn::MultiHeadAttention refine;  // cross-attention
  LocalScan local_scan;

 private:
  GeneratorConfig cfg_;
  std::array<PartHead, 4> heads_;
};

struct Stage2EpochStats {
  double loss = 0;
  std::array<double, 4> accuracy = {};  // train-split code accuracy per part
};

struct Stage2Result {
  Generator model;
  std::vector<Stage2EpochStats> curve;
};

// Trains the generator against targets produced by the frozen stage-1
// encoders; VQ parameters are locked for the duration.
Stage2Result train_stage2(const std::vector<corpus::Clip>& clips,
                          std::array<vq::VqVae, 4>& vqs, const GeneratorConfig& cfg);

struct HeldOutStats {
  std::array<double, 4> accuracy = {};
  std::array<double, 4> rec_latent = {};     // unweighted latent MSE
  std::array<double, 4> latent_variance = {};  // variance of target latents
};
HeldOutStats evaluate_stage2(const Generator& gen, const std::array<vq::VqVae, 4>& vqs,
                             const std::vector<corpus::Clip>& clips);

struct GenerationTiming {
  double audio_s = 0, text_s = 0, global_s = 0, local_s = 0;
  std::array<double, 4> decode_s = {};  // face, upper, hands, lower
  double total_s = 0;
};

// Full pipeline: speech -> fused features -> global scan -> query refine ->
// local scan -> frozen per-part decoders -> assembled 437-channel frames.
// `seed_pose`, when given, must hold at least 4 full-body frames; those
// frames are pushed through the frozen stage-1 encoders and their quantized
// latent replaces the first predicted latent step of every part.
motion::MotionSequence generate(const Generator& gen,
                                const std::array<vq::VqVae, 4>& vqs,
                                const std::vector<double>& audio,
                                const std::vector<int64_t>& tokens, int64_t speaker,
                                GenerationTiming* timing = nullptr,
                                const motion::MotionSequence* seed_pose = nullptr);

}  // namespace mtk::synth
