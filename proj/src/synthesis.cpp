#include "mtk/synthesis.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mtk/checkpoint.hpp"
#include "mtk/optim.hpp"

namespace mtk::synth {

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Array ones_minus(const Array& w) { return nd::add_scalar(nd::neg(w), 1.0); }

}  // namespace

std::vector<double> amplitude_envelope(const std::vector<double>& samples,
                                       int64_t frames) {
  int64_t s = int64_t(samples.size());
  if (s < frames)
    throw std::invalid_argument("audio shorter than the frame span: " +
                                std::to_string(s) + " samples for " +
                                std::to_string(frames) + " frames");
  std::vector<double> env(static_cast<size_t>(frames), 0.0);
  for (int64_t t = 0; t < frames; ++t) {
    int64_t lo = t * s / frames;
    int64_t hi = std::max(lo + 1, (t + 1) * s / frames);
    double acc = 0.0;
    for (int64_t i = lo; i < hi; ++i) acc += std::abs(samples[size_t(i)]);
    env[size_t(t)] = acc / double(hi - lo);
  }
  return env;
}

AudioEncoder::AudioEncoder(int64_t model_dim, Rng& rng) : dim_(model_dim) {
  if (model_dim % 2 != 0) throw std::invalid_argument("audio encoder needs even D");
  raw1_ = nn::Conv1d(1, 8, 15, 8, 4, rng);
  raw2_ = nn::Conv1d(8, 16, 15, 8, 4, rng);
  raw3_ = nn::Conv1d(16, 16, 9, 4, 4, rng);
  env1_ = nn::Conv1d(1, 16, 5, 1, 2, rng);
  env2_ = nn::Conv1d(16, 16, 5, 1, 2, rng);
  face_proj_ = nn::Linear(32, model_dim / 2, rng);
  body_proj_ = nn::Linear(16, model_dim / 2, rng);
}

Array AudioEncoder::operator()(const std::vector<double>& samples,
                               int64_t frames) const {
  auto env = amplitude_envelope(samples, frames);
  Array env_in = Array::from({1, frames, 1}, std::move(env));
  Array env_feats = nd::silu(env2_(nd::silu(env1_(env_in))));  // (1, N, 16)

  // strided conv stack over the raw waveform, mean-pooled onto the frames
  Array raw_in = Array::from({1, int64_t(samples.size()), 1},
                             std::vector<double>(samples.begin(), samples.end()));
  Array raw = nd::silu(raw1_(raw_in));
  raw = nd::silu(raw2_(raw));
  raw = nd::silu(raw3_(raw));
  Array raw_frames = nd::pool_mean(raw, 1, frames);  // (1, N, 16)

  Array face = face_proj_(nd::concat({env_feats, raw_frames}, -1));
  Array body = body_proj_(env_feats);
  return nd::concat({face, body}, -1);  // (1, N, D)
}

void AudioEncoder::params(const std::string& prefix, nn::ParamMap& pm) const {
  raw1_.params(prefix + ".raw1", pm);
  raw2_.params(prefix + ".raw2", pm);
  raw3_.params(prefix + ".raw3", pm);
  env1_.params(prefix + ".env1", pm);
  env2_.params(prefix + ".env2", pm);
  face_proj_.params(prefix + ".face_proj", pm);
  body_proj_.params(prefix + ".body_proj", pm);
}

TextEncoder::TextEncoder(int64_t vocab, int64_t embed, int64_t model_dim, Rng& rng)
    : table_(vocab, embed, rng), proj_(embed, model_dim, rng) {}

Array TextEncoder::operator()(const std::vector<int64_t>& tokens) const {
  Array rows = table_(tokens);  // throws on out-of-vocabulary ids
  return nd::reshape(proj_(rows), {1, int64_t(tokens.size()), proj_.w.dim(1)});
}

void TextEncoder::params(const std::string& prefix, nn::ParamMap& pm) const {
  table_.params(prefix + ".table", pm);
  proj_.params(prefix + ".proj", pm);
}

FusionGate::FusionGate(int64_t model_dim, Rng& rng)
    : gate_t_(2 * model_dim, 2 * model_dim, rng),
      gate_a_(2 * model_dim, 2 * model_dim, rng) {}

FusionGate::Fused FusionGate::operator()(const Array& f_a, const Array& f_t,
                                         const Array& s_id) const {
  if (f_a.shape() != f_t.shape())
    throw std::invalid_argument("fuse_features: stream shapes differ");
  int64_t n = f_a.dim(1), d = f_a.dim(2);
  Array u = nd::concat({nd::add(f_a, s_id), nd::add(f_t, s_id)}, -1);  // (1,N,2D)
  auto gate_weights = [&](const nn::Linear& lin) {
    Array logits = nd::reshape(lin(u), {1, n, d, 2});
    Array pairs = nd::softmax(logits, -1);
    return nd::reshape(nd::slice(pairs, -1, 0, 1), {1, n, d});
  };
  Array w_t = gate_weights(gate_t_);
  Array w_a = gate_weights(gate_a_);
  Fused out;
  out.f_t = nd::add(nd::mul(w_t, f_a), nd::mul(ones_minus(w_t), f_t));
  out.f_a = nd::add(nd::mul(w_a, f_a), nd::mul(ones_minus(w_a), f_t));
  return out;
}

void FusionGate::params(const std::string& prefix, nn::ParamMap& pm) const {
  gate_t_.params(prefix + ".gate_t", pm);
  gate_a_.params(prefix + ".gate_a", pm);
}

GlobalScan::GlobalScan(const GeneratorConfig& cfg, Rng& rng)
    : mhsa_({cfg.model_dim, cfg.heads}, rng),
      mamba_speech_(cfg.model_dim, cfg.ssm_dim, cfg.ssm_state, rng),
      mamba_query_(cfg.model_dim, cfg.ssm_dim, cfg.ssm_state, rng),
      merge_(3 * cfg.model_dim, cfg.model_dim, rng),
      latent_len_(cfg.latent_len) {
  double bound = 1.0 / std::sqrt(double(cfg.model_dim));
  q_global_ = Array::uniform({cfg.latent_len, cfg.model_dim}, -bound, bound, rng, true);
}

GlobalScanResult GlobalScan::operator()(const Array& fused_a, const Array& fused_t) const {
  int64_t d = q_global_.dim(1);
  GlobalScanResult out;
  Array q = nd::reshape(q_global_, {1, latent_len_, d});
  out.f_bar_global = mhsa_.self_attn(q);

  Array speech = nd::concat({fused_t, fused_a}, 1);  // sequence-axis concat
  out.f_speech = mamba_speech_(speech);
  Array f_hat_global = mamba_query_(out.f_bar_global);

  // align lengths: each speech half pooled down to the query length, then
  // channel-concat and merge
  int64_t n = fused_t.dim(1);
  Array s_t = nd::pool_mean(nd::slice(out.f_speech, 1, 0, n), 1, latent_len_);
  Array s_a = nd::pool_mean(nd::slice(out.f_speech, 1, n, n), 1, latent_len_);
  out.f_global = merge_(nd::concat({s_t, s_a, f_hat_global}, -1));
  return out;
}

void GlobalScan::params(const std::string& prefix, nn::ParamMap& pm) const {
  pm.add(prefix + ".q_global", q_global_);
  mhsa_.params(prefix + ".mhsa", pm);
  mamba_speech_.params(prefix + ".mamba_speech", pm);
  mamba_query_.params(prefix + ".mamba_query", pm);
  merge_.params(prefix + ".merge", pm);
}

LocalScan::LocalScan(const GeneratorConfig& cfg, const std::array<PartHead, 4>& heads,
                     Rng& rng)
    : merge_(cfg.ssm_dim, cfg.model_dim, rng) {
  for (size_t p = 0; p < 4; ++p) {
    auto& path = parts_[p];
    bool is_face = motion::kAllParts[p] == motion::BodyPart::face;
    if (!is_face) path.mhsa.emplace(attn::AttentionConfig{cfg.model_dim, cfg.heads}, rng);
    path.gate = nn::Linear(cfg.model_dim, cfg.ssm_dim, rng);
    path.conv = nn::Conv1d(cfg.model_dim, cfg.ssm_dim, 4, 1, 3, 0, rng);
    path.core = ssm::SsmCore(cfg.ssm_dim, cfg.ssm_state, rng);
    path.head_latent = nn::Linear(cfg.model_dim, heads[p].latent_channels, rng);
    path.head_logits = nn::Linear(cfg.model_dim, heads[p].codes, rng);
  }
}

LocalScanResult LocalScan::operator()(const Array& f_refine, const Array& f_global,
                                      const std::vector<double>* mask) const {
  Array x = nd::add(f_refine, f_global);  // (1, M, D)
  int64_t m = x.dim(1);
  if (mask) {
    if (int64_t(mask->size()) != m)
      throw std::invalid_argument("local scan mask length mismatch");
    Array mask_col = Array::from({1, m, 1}, *mask);
    x = nd::mul(x, mask_col);
  }

  LocalScanResult out;
  Array summed;
  for (size_t p = 0; p < 4; ++p) {
    const auto& path = parts_[p];
    Array in_p = path.mhsa ? path.mhsa->self_attn(x) : x;
    Array z_p = path.gate(in_p);
    Array xp = nd::silu(path.conv(x));
    auto sel = ssm::select_parameters(xp, path.core);
    auto disc = ssm::discretize(sel.delta, path.core.a(), sel.b,
                                ssm::Discretization::euler);
    Array y_p = ssm::scan(disc.a_bar, disc.b_bar, sel.c, xp);
    Array gated = nd::mul(y_p, nd::silu(z_p));
    out.part_streams[p] = gated;
    summed = p == 0 ? gated : nd::add(summed, gated);
  }
  out.tokens_out = nd::add(merge_(summed), x);
  for (size_t p = 0; p < 4; ++p) {
    out.latents[p] = parts_[p].head_latent(out.tokens_out);
    out.logits[p] = parts_[p].head_logits(out.tokens_out);
  }
  return out;
}

void LocalScan::params(const std::string& prefix, nn::ParamMap& pm) const {
  for (size_t p = 0; p < 4; ++p) {
    std::string base = prefix + "." + motion::part_name(motion::kAllParts[p]);
    const auto& path = parts_[p];
    if (path.mhsa) path.mhsa->params(base + ".mhsa", pm);
    path.gate.params(base + ".gate", pm);
    path.conv.params(base + ".conv", pm);
    path.core.params(base + ".core", pm);
    path.head_latent.params(base + ".head_latent", pm);
    path.head_logits.params(base + ".head_logits", pm);
  }
  merge_.params(prefix + ".merge", pm);
}

GeneratorLossTerms generator_loss(const LocalScanResult& out,
                                  const std::array<Array, 4>& target_latents,
                                  const std::array<std::vector<int64_t>, 4>& target_idx,
                                  const GeneratorConfig& cfg) {
  GeneratorLossTerms terms;
  Array total = Array::scalar(0.0);
  for (size_t p = 0; p < 4; ++p) {
    Array rec = nd::mul_scalar(nd::mse(out.latents[p], target_latents[p]), cfg.beta[p]);
    terms.rec[p] = rec.item();
    total = nd::add(total, rec);
    if (cfg.alpha[p] != 0.0) {
      Array cls = nd::mul_scalar(
          nd::nll(nd::log_softmax(out.logits[p], -1), target_idx[p]), cfg.alpha[p]);
      terms.cls[p] = cls.item();
      total = nd::add(total, cls);
    } else {
      terms.cls[p] = 0.0;  // face: no classification loss by configuration
    }
  }
  terms.total = total;
  return terms;
}

Generator::Generator(const GeneratorConfig& cfg, const std::array<PartHead, 4>& heads,
                     Rng& rng)
    : audio_enc(cfg.model_dim, rng),
      text_enc(cfg.vocab, cfg.text_embed, cfg.model_dim, rng),
      speaker_table(cfg.speakers, cfg.model_dim, rng),
      fuse(cfg.model_dim, rng),
      global_scan(cfg, rng),
      refine({cfg.model_dim, cfg.heads}, rng),
      local_scan(cfg, heads, rng),
      cfg_(cfg),
      heads_(heads) {
  if (cfg.latent_len * vq::kDownsample != cfg.frames)
    throw std::invalid_argument("latent_len must be frames / 4");
}

Generator::Forward Generator::forward(const std::vector<double>& audio,
                                      const std::vector<int64_t>& tokens,
                                      int64_t speaker,
                                      const std::vector<double>* mask) const {
  if (int64_t(tokens.size()) != cfg_.frames)
    throw std::invalid_argument("expected one token per frame: got " +
                                std::to_string(tokens.size()) + " for " +
                                std::to_string(cfg_.frames) + " frames");
  if (speaker < 0 || speaker >= cfg_.speakers)
    throw std::invalid_argument("speaker index out of range");
  Forward f;
  f.f_a = audio_enc(audio, cfg_.frames);
  f.f_t = text_enc(tokens);
  Array s_id = nd::reshape(speaker_table({speaker}), {cfg_.model_dim});
  f.fused = fuse(f.f_a, f.f_t, s_id);
  f.global = global_scan(f.fused.f_a, f.fused.f_t);
  Array kv = nd::concat({f.fused.f_t, f.fused.f_a}, 1);
  f.f_refine = refine.cross_attn(f.global.f_bar_global, kv);
  f.local = local_scan(f.f_refine, f.global.f_global, mask);
  return f;
}

void Generator::params(nn::ParamMap& pm) const {
  audio_enc.params("audio", pm);
  text_enc.params("text", pm);
  speaker_table.params("speaker", pm);
  fuse.params("fuse", pm);
  global_scan.params("global", pm);
  refine.params("refine", pm);
  local_scan.params("local", pm);
}

void Generator::save(const std::string& path) const {
  nn::ParamMap pm;
  std::vector<double> meta = {
      double(cfg_.model_dim), double(cfg_.heads),     double(cfg_.ssm_dim),
      double(cfg_.ssm_state), double(cfg_.latent_len), double(cfg_.frames),
      double(cfg_.vocab),     double(cfg_.speakers),  double(cfg_.text_embed),
      double(cfg_.fps)};
  for (size_t p = 0; p < 4; ++p) {
    meta.push_back(double(heads_[p].latent_channels));
    meta.push_back(double(heads_[p].codes));
  }
  pm.add("meta", Array::from({int64_t(meta.size())}, meta));
  params(pm);
  save_checkpoint(path, "MTG2", 0, pm);
}

Generator Generator::load(const std::string& path) {
  RawCheckpoint raw = read_checkpoint_raw(path, "MTG2");
  const nd::Array* meta = raw.find("meta");
  if (!meta || meta->size() != 18)
    throw IoError(IoErrorKind::bad_data, path, "missing meta tensor");
  const auto& v = meta->data();
  GeneratorConfig cfg;
  cfg.model_dim = int64_t(v[0]);
  cfg.heads = int64_t(v[1]);
  cfg.ssm_dim = int64_t(v[2]);
  cfg.ssm_state = int64_t(v[3]);
  cfg.latent_len = int64_t(v[4]);
  cfg.frames = int64_t(v[5]);
  cfg.vocab = int64_t(v[6]);
  cfg.speakers = int64_t(v[7]);
  cfg.text_embed = int64_t(v[8]);
  cfg.fps = int64_t(v[9]);
  std::array<PartHead, 4> heads;
  for (size_t p = 0; p < 4; ++p)
    heads[p] = {int64_t(v[10 + 2 * p]), int64_t(v[11 + 2 * p])};
  Rng rng(0);
  Generator gen(cfg, heads, rng);
  nn::ParamMap pm;
  pm.add("meta", Array::zeros({18}));
  gen.params(pm);
  load_checkpoint(path, "MTG2", pm);
  return gen;
}

namespace {

struct ClipTargets {
  std::array<Array, 4> latents;
  std::array<std::vector<int64_t>, 4> idx;
};

ClipTargets make_targets(const corpus::Clip& clip, const std::array<vq::VqVae, 4>& vqs) {
  nd::NoGradGuard guard;
  ClipTargets t;
  for (size_t p = 0; p < 4; ++p) {
    auto info = vqs[p].info();
    Array m = clip.motion.to_array(info.begin, info.width);
    Array z_hat = vqs[p].encode(m);
    auto q = vq::quantize(z_hat, vqs[p].codebook());
    t.latents[p] = nd::detach(q.z_q);
    t.idx[p] = std::move(q.idx);
  }
  return t;
}

std::array<double, 4> batch_accuracy(const LocalScanResult& out,
                                     const std::array<std::vector<int64_t>, 4>& idx) {
  std::array<double, 4> acc = {};
  for (size_t p = 0; p < 4; ++p) {
    int64_t codes = out.logits[p].dim(-1);
    int64_t rows = out.logits[p].size() / codes;
    int64_t hits = 0;
    for (int64_t r = 0; r < rows; ++r) {
      const double* row = out.logits[p].data().data() + r * codes;
      int64_t best = 0;
      for (int64_t k = 1; k < codes; ++k)
        if (row[k] > row[best]) best = k;
      if (best == idx[p][size_t(r)]) ++hits;
    }
    acc[p] = double(hits) / double(rows);
  }
  return acc;
}

}  // namespace

Stage2Result train_stage2(const std::vector<corpus::Clip>& clips,
                          std::array<vq::VqVae, 4>& vqs, const GeneratorConfig& cfg) {
  if (clips.empty()) throw std::invalid_argument("train_stage2: empty corpus");
  for (auto& v : vqs) v.set_trainable(false);  // stage-1 models stay frozen

  Rng rng(cfg.seed);
  Rng init_rng = rng.fork("init");
  std::array<PartHead, 4> heads;
  for (size_t p = 0; p < 4; ++p)
    heads[p] = {vqs[p].config().latent_channels, vqs[p].config().codebook_size};
  Stage2Result result{Generator(cfg, heads, init_rng), {}};
  Generator& gen = result.model;

  // frozen targets never change: compute them once
  std::vector<ClipTargets> targets;
  targets.reserve(clips.size());
  for (const auto& c : clips) targets.push_back(make_targets(c, vqs));

  nn::ParamMap pm;
  gen.params(pm);
  Adam opt(pm.arrays(), AdamConfig{cfg.lr});
  Rng order_rng = rng.fork("order");
  Rng mask_rng = rng.fork("mask");

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order(clips.size());
    for (size_t i = 0; i < clips.size(); ++i) order[i] = i;
    for (size_t i = clips.size() - 1; i > 0; --i)
      std::swap(order[i], order[order_rng.below(uint64_t(i + 1))]);

    double loss_sum = 0.0;
    std::array<double, 4> acc_sum = {};
    for (size_t step = 0; step < order.size(); ++step) {
      const auto& clip = clips[order[step]];
      const auto& tgt = targets[order[step]];
      std::vector<double> mask(static_cast<size_t>(cfg.latent_len), 1.0);
      for (auto& v : mask)
        if (mask_rng.uniform() < cfg.mask_ratio) v = 0.0;
      auto fwd = gen.forward(clip.audio, clip.tokens, clip.speaker, &mask);
      auto terms = generator_loss(fwd.local, tgt.latents, tgt.idx, cfg);
      opt.zero_grad();
      nd::backward(terms.total);
      opt.step();
      loss_sum += terms.total.item();
      auto acc = batch_accuracy(fwd.local, tgt.idx);
      for (size_t p = 0; p < 4; ++p) acc_sum[p] += acc[p];
    }
    Stage2EpochStats stats;
    stats.loss = loss_sum / double(order.size());
    for (size_t p = 0; p < 4; ++p) stats.accuracy[p] = acc_sum[p] / double(order.size());
    result.curve.push_back(stats);
  }
  return result;
}

HeldOutStats evaluate_stage2(const Generator& gen, const std::array<vq::VqVae, 4>& vqs,
                             const std::vector<corpus::Clip>& clips) {
  if (clips.empty()) throw std::invalid_argument("evaluate_stage2: no clips");
  nd::NoGradGuard guard;
  HeldOutStats stats;
  std::array<double, 4> sq_sum = {}, sum = {};
  std::array<int64_t, 4> count = {};
  for (const auto& clip : clips) {
    auto tgt = make_targets(clip, vqs);
    auto fwd = gen.forward(clip.audio, clip.tokens, clip.speaker, nullptr);
    auto acc = batch_accuracy(fwd.local, tgt.idx);
    for (size_t p = 0; p < 4; ++p) {
      stats.accuracy[p] += acc[p];
      stats.rec_latent[p] += nd::mse(fwd.local.latents[p], tgt.latents[p]).item();
      for (double v : tgt.latents[p].data()) {
        sum[p] += v;
        sq_sum[p] += v * v;
        ++count[p];
      }
    }
  }
  for (size_t p = 0; p < 4; ++p) {
    stats.accuracy[p] /= double(clips.size());
    stats.rec_latent[p] /= double(clips.size());
    double mean = sum[p] / double(count[p]);
    stats.latent_variance[p] = sq_sum[p] / double(count[p]) - mean * mean;
  }
  return stats;
}

motion::MotionSequence generate(const Generator& gen,
                                const std::array<vq::VqVae, 4>& vqs,
                                const std::vector<double>& audio,
                                const std::vector<int64_t>& tokens, int64_t speaker,
                                GenerationTiming* timing,
                                const motion::MotionSequence* seed_pose) {
  nd::NoGradGuard guard;
  const auto& cfg = gen.config();
  if (seed_pose && seed_pose->frames < vq::kDownsample)
    throw std::invalid_argument("seed pose needs at least 4 frames");
  GenerationTiming local_timing;
  GenerationTiming& tm = timing ? *timing : local_timing;
  double t0 = now_s();

  Array f_a = gen.audio_enc(audio, cfg.frames);
  double t1 = now_s();
  tm.audio_s = t1 - t0;

  Array f_t = gen.text_enc(tokens);
  double t2 = now_s();
  tm.text_s = t2 - t1;

  Array s_id = nd::reshape(gen.speaker_table({speaker}), {cfg.model_dim});
  auto fused = gen.fuse(f_a, f_t, s_id);
  auto global = gen.global_scan(fused.f_a, fused.f_t);
  Array kv = nd::concat({fused.f_t, fused.f_a}, 1);
  Array f_refine = gen.refine.cross_attn(global.f_bar_global, kv);
  double t3 = now_s();
  tm.global_s = t3 - t2;

  auto local = gen.local_scan(f_refine, global.f_global, nullptr);
  double t4 = now_s();
  tm.local_s = t4 - t3;

  motion::MotionSequence out;
  out.frames = cfg.frames;
  out.dims = motion::kFullDim;
  out.fps = double(cfg.fps);
  out.data.assign(static_cast<size_t>(out.frames * out.dims), 0.0);
  double t_prev = t4;
  for (size_t p = 0; p < 4; ++p) {
    Array latents = local.latents[p];
    if (seed_pose) {
      // first latent unit covers exactly the 4 seed frames
      auto info_p = vqs[p].info();
      auto head = seed_pose->slice_channels(info_p.begin, info_p.width);
      head.data.resize(size_t(vq::kDownsample * info_p.width));
      head.frames = vq::kDownsample;
      Array seed_z = vqs[p].encode(
          Array::from({1, vq::kDownsample, info_p.width}, std::move(head.data)));
      auto seed_q = vq::quantize(seed_z, vqs[p].codebook());
      latents = nd::concat({seed_q.z_q, nd::slice(latents, 1, 1, latents.dim(1) - 1)}, 1);
    }
    Array decoded = vqs[p].decode(latents);  // (1, T, Dp)
    auto info = vqs[p].info();
    for (int64_t t = 0; t < out.frames; ++t)
      for (int64_t c = 0; c < info.width; ++c)
        out.at(t, info.begin + c) = decoded.data()[size_t((t * info.width) + c)];
    double t_now = now_s();
    tm.decode_s[p] = t_now - t_prev;
    t_prev = t_now;
  }
  tm.total_s = t_prev - t0;
  return out;
}

}  // namespace mtk::synth
