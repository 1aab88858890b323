#include "mtk/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mtk/io.hpp"
#include "mtk/rng.hpp"

namespace fs = std::filesystem;

namespace mtk::corpus {

config::Map CorpusSpec::to_config() const {
  config::Map m;
  m["seed"] = std::to_string(seed);
  m["speakers"] = std::to_string(speakers);
  m["clips_per_speaker"] = std::to_string(clips_per_speaker);
  m["clip_seconds"] = std::to_string(clip_seconds);
  m["fps"] = std::to_string(fps);
  m["audio_rate"] = std::to_string(audio_rate);
  m["vocab"] = std::to_string(vocab);
  return m;
}

CorpusSpec CorpusSpec::from_config(const config::Map& m) {
  CorpusSpec s;
  s.seed = config::get_u64(m, "seed", s.seed);
  s.speakers = config::get_int(m, "speakers", s.speakers);
  s.clips_per_speaker = config::get_int(m, "clips_per_speaker", s.clips_per_speaker);
  s.clip_seconds = config::get_double(m, "clip_seconds", s.clip_seconds);
  s.fps = config::get_int(m, "fps", s.fps);
  s.audio_rate = config::get_int(m, "audio_rate", s.audio_rate);
  s.vocab = config::get_int(m, "vocab", s.vocab);
  return s;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

SplitCounts split_counts(int64_t n) {
  SplitCounts c;
  c.train = int64_t(std::llround(double(n) * 0.85));
  c.val = int64_t(std::llround(double(n) * 0.075));
  c.test = n - c.train - c.val;
  return c;
}

std::vector<Split> split_assignment(int64_t n, uint64_t seed) {
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[size_t(i)] = i;
  Rng rng = Rng(seed).fork("split");
  for (int64_t i = n - 1; i > 0; --i)
    std::swap(order[size_t(i)], order[rng.below(uint64_t(i + 1))]);
  auto counts = split_counts(n);
  std::vector<Split> out(static_cast<size_t>(n), Split::test);
  for (int64_t i = 0; i < n; ++i) {
    Split s = i < counts.train             ? Split::train
              : i < counts.train + counts.val ? Split::val
                                              : Split::test;
    out[size_t(order[size_t(i)])] = s;
  }
  return out;
}

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

struct JointStyle {
  double axis[3];
  // three sinusoid components per joint keep the latent space from
  // degenerating to a handful of codebook entries
  double amp[3], freq[3], phase[3];
};

// face channels are a low-rank mixture of a few shared drivers, the way
// blendshape coefficients co-vary on a real face
constexpr int64_t kFaceDrivers = 6;

struct FaceStyle {
  // driver 0 is the beat-locked "open" signal; the rest are sinusoids
  double freq[kFaceDrivers], phase[kFaceDrivers];
  std::vector<double> mix;  // (kFaceDim x kFaceDrivers)
};

FaceStyle face_style(const CorpusSpec& spec, int64_t speaker) {
  Rng rng = Rng(spec.seed).fork("face_style").fork(uint64_t(speaker));
  FaceStyle fs;
  for (int64_t k = 0; k < kFaceDrivers; ++k) {
    fs.freq[k] = rng.uniform(0.3, 1.0);
    fs.phase[k] = rng.uniform(0, kTau);
  }
  // articulation dominates: a strong beat-locked component per channel with
  // small slow residuals on top
  fs.mix.resize(size_t(motion::kFaceDim * kFaceDrivers));
  for (int64_t c = 0; c < motion::kFaceDim; ++c) {
    fs.mix[size_t(c * kFaceDrivers)] = rng.uniform(0.4, 1.0);
    for (int64_t k = 1; k < kFaceDrivers; ++k)
      fs.mix[size_t(c * kFaceDrivers + k)] = rng.uniform(-0.15, 0.15);
  }
  return fs;
}

// per-speaker motion style so clips of one speaker share dynamics the
// generator can actually learn from speech
std::vector<JointStyle> speaker_style(const CorpusSpec& spec, int64_t speaker) {
  Rng rng = Rng(spec.seed).fork("style").fork(uint64_t(speaker));
  std::vector<JointStyle> style(55);
  for (auto& j : style) {
    j.axis[0] = rng.uniform(-1, 1);
    j.axis[1] = rng.uniform(-1, 1);
    j.axis[2] = rng.uniform(-1, 1);
    double n = std::sqrt(j.axis[0] * j.axis[0] + j.axis[1] * j.axis[1] +
                         j.axis[2] * j.axis[2]);
    if (n < 0.2) { j.axis[0] = 1.0; j.axis[1] = j.axis[2] = 0.0; n = 1.0; }
    j.axis[0] /= n; j.axis[1] /= n; j.axis[2] /= n;
    j.amp[0] = rng.uniform(0.15, 0.45);
    j.freq[0] = rng.uniform(0.25, 0.9);
    j.phase[0] = rng.uniform(0, kTau);
    j.amp[1] = rng.uniform(0.05, 0.2);
    j.freq[1] = rng.uniform(1.0, 2.2);
    j.phase[1] = rng.uniform(0, kTau);
    j.amp[2] = rng.uniform(0.02, 0.1);
    j.freq[2] = rng.uniform(2.5, 4.0);
    j.phase[2] = rng.uniform(0, kTau);
  }
  return style;
}

std::array<double, 9> axis_angle(const double axis[3], double angle) {
  double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  double ax = axis[0], ay = axis[1], az = axis[2];
  return {t * ax * ax + c,      t * ax * ay - s * az, t * ax * az + s * ay,
          t * ax * ay + s * az, t * ay * ay + c,      t * ay * az - s * ax,
          t * ax * az - s * ay, t * ay * az + s * ax, t * az * az + c};
}

}  // namespace

Clip make_clip(const CorpusSpec& spec, int64_t clip_id) {
  Clip clip;
  clip.id = clip_id;
  clip.speaker = clip_id / spec.clips_per_speaker;
  clip.audio_rate = spec.audio_rate;
  Rng rng = Rng(spec.seed).fork("clip").fork(uint64_t(clip_id));

  int64_t frames = spec.frames();
  int64_t samples = spec.samples();
  double duration = spec.clip_seconds;
  double fps = double(spec.fps);

  // tokens: sticky Markov chain, one id per frame
  Rng tok_rng = rng.fork("tokens");
  clip.tokens.resize(static_cast<size_t>(frames));
  int64_t cur = int64_t(tok_rng.below(uint64_t(spec.vocab)));
  for (int64_t t = 0; t < frames; ++t) {
    if (t > 0 && tok_rng.uniform() < 0.08)
      cur = int64_t(tok_rng.below(uint64_t(spec.vocab)));
    clip.tokens[size_t(t)] = cur;
  }

  // click rhythm: per-speaker base period, interval scaled by the current
  // token (chain transitions modulate the rhythm), light jitter
  Rng click_rng = rng.fork("clicks");
  double base = 0.45 + 0.2 * double(clip.speaker);
  std::vector<double> clicks;
  double t_click = base * (0.6 + 0.2 * click_rng.uniform());
  while (t_click < duration - 0.1) {
    clicks.push_back(t_click);
    int64_t frame = std::min<int64_t>(frames - 1, int64_t(t_click * fps));
    double factor = 0.8 + 0.4 * double(clip.tokens[size_t(frame)]) / double(spec.vocab);
    t_click += base * factor * (1.0 + 0.08 * (click_rng.uniform() - 0.5));
  }

  // audio: low-passed noise carrier + decaying click bursts
  Rng audio_rng = rng.fork("audio");
  clip.audio.assign(static_cast<size_t>(samples), 0.0);
  double lp = 0.0;
  for (int64_t i = 0; i < samples; ++i) {
    lp = 0.9 * lp + 0.1 * (audio_rng.uniform(-1, 1));
    clip.audio[size_t(i)] = 0.03 * lp;
  }
  int64_t burst_len = spec.audio_rate / 40;  // 25 ms
  for (double tc : clicks) {
    int64_t start = int64_t(tc * double(spec.audio_rate));
    for (int64_t k = 0; k < burst_len && start + k < samples; ++k) {
      double tau = double(k) / double(spec.audio_rate);
      clip.audio[size_t(start + k)] +=
          0.9 * std::exp(-tau / 0.006) * std::sin(kTau * 900.0 * tau);
    }
  }

  // motion: speed profile dips at click times; joint angles follow the
  // warped clock so velocity minima land on the clicks
  auto speed_at = [&](double t) {
    double dip = 0.0;
    for (double tc : clicks) {
      double d = (t - tc) / 0.05;
      dip += std::exp(-0.5 * d * d);
    }
    return 1.0 - 0.85 * std::min(1.0, dip);
  };
  // mouth articulation responds over ~150 ms, much wider than the velocity dip
  auto open_at = [&](double t) {
    double open = 0.0;
    for (double tc : clicks) {
      double d = (t - tc) / 0.15;
      open += std::exp(-0.5 * d * d);
    }
    return std::min(1.0, open);
  };
  std::vector<double> warped(static_cast<size_t>(frames), 0.0);
  double acc = 0.0;
  for (int64_t t = 0; t < frames; ++t) {
    acc += speed_at(double(t) / fps) / fps;
    warped[size_t(t)] = acc;
  }

  auto style = speaker_style(spec, clip.speaker);
  auto fstyle = face_style(spec, clip.speaker);
  Rng noise_rng = rng.fork("motion_noise");
  // mild per-clip amplitude modulation on top of the speaker style
  Rng mod_rng = rng.fork("amp_mod");
  std::vector<double> amp_mod(55);
  for (auto& v : amp_mod) v = 0.75 + 0.5 * mod_rng.uniform();
  std::vector<double> drift(55, 0.0);

  clip.motion.frames = frames;
  clip.motion.dims = motion::kFullDim;
  clip.motion.fps = fps;
  clip.motion.data.assign(static_cast<size_t>(frames * motion::kFullDim), 0.0);
  for (int64_t t = 0; t < frames; ++t) {
    double tw = warped[size_t(t)];
    double sec = double(t) / fps;
    for (int64_t j = 0; j < 55; ++j) {
      const auto& st = style[size_t(j)];
      drift[size_t(j)] = 0.95 * drift[size_t(j)] + 0.05 * noise_rng.uniform(-1, 1);
      double angle = 0.03 * drift[size_t(j)];
      for (int k = 0; k < 3; ++k)
        angle += amp_mod[size_t(j)] * st.amp[k] *
                 std::sin(kTau * st.freq[k] * tw + st.phase[k]);
      auto rot = axis_angle(st.axis, angle);
      // first two matrix columns are the Rot6D channels
      clip.motion.at(t, j * 6 + 0) = rot[0];
      clip.motion.at(t, j * 6 + 1) = rot[3];
      clip.motion.at(t, j * 6 + 2) = rot[6];
      clip.motion.at(t, j * 6 + 3) = rot[1];
      clip.motion.at(t, j * 6 + 4) = rot[4];
      clip.motion.at(t, j * 6 + 5) = rot[7];
    }
    double open = open_at(sec);  // mouth opens on the beat
    double drivers[kFaceDrivers];
    drivers[0] = open;
    for (int64_t k = 1; k < kFaceDrivers; ++k)
      drivers[k] = std::sin(kTau * fstyle.freq[k] * tw + fstyle.phase[k]);
    for (int64_t c = 0; c < motion::kFaceDim; ++c) {
      double v = 0.0;
      for (int64_t k = 0; k < kFaceDrivers; ++k)
        v += fstyle.mix[size_t(c * kFaceDrivers + k)] * drivers[k];
      clip.motion.at(t, motion::kFaceBegin + c) = 0.5 * v;
    }
    for (int64_t c = 0; c < motion::kContactDim; ++c)
      clip.motion.at(t, motion::kContactBegin + c) =
          (int64_t(sec / 0.8) + c) % 2 == 0 ? 1.0 : 0.0;
    for (int64_t c = 0; c < motion::kTranslationDim; ++c)
      clip.motion.at(t, motion::kTranslationBegin + c) =
          0.08 * std::sin(kTau * 0.08 * sec + double(c) * 1.7 + double(clip.speaker));
  }
  return clip;
}

void write_audio(const std::string& path, const std::vector<double>& samples,
                 int64_t rate) {
  ByteWriter w;
  w.bytes("MTAU", 4);
  w.u32(uint32_t(rate));
  w.u32(uint32_t(samples.size()));
  for (double v : samples) w.f32(float(v));
  w.write_file(path);
}

AudioFile read_audio(const std::string& path) {
  ByteReader r(path);
  r.expect_magic("MTAU");
  AudioFile out;
  out.rate = int64_t(r.u32());
  uint32_t len = r.u32();
  if (r.remaining() != size_t(len) * 4)
    r.fail(IoErrorKind::truncated,
           "payload size mismatch: expected " + std::to_string(size_t(len) * 4) +
               " bytes, have " + std::to_string(r.remaining()));
  out.samples.resize(len);
  for (auto& v : out.samples) v = double(r.f32());
  return out;
}

void write_tokens(const std::string& path, const std::vector<int64_t>& tokens) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path, "cannot write tokens");
  for (int64_t t : tokens) out << t << "\n";
}

std::vector<int64_t> read_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::open_failed, path, "cannot open tokens");
  std::vector<int64_t> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      size_t used = 0;
      int64_t v = std::stoll(line, &used);
      if (used != line.size()) throw std::invalid_argument("junk");
      out.push_back(v);
    } catch (const std::exception&) {
      throw IoError(IoErrorKind::bad_data, path,
                    "line " + std::to_string(lineno) + ": not a token id");
    }
  }
  return out;
}

void generate_corpus(const CorpusSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (Split s : {Split::train, Split::val, Split::test})
    fs::create_directories(fs::path(out_dir) / split_name(s));
  auto assignment = split_assignment(spec.total_clips(), spec.seed);
  for (int64_t id = 0; id < spec.total_clips(); ++id) {
    Clip clip = make_clip(spec, id);
    fs::path dir = fs::path(out_dir) / split_name(assignment[size_t(id)]);
    std::string stem = "clip_" + std::to_string(id);
    motion::write_motion((dir / (stem + ".mtmo")).string(), clip.motion);
    write_audio((dir / (stem + ".mtau")).string(), clip.audio, clip.audio_rate);
    write_tokens((dir / (stem + ".txt")).string(), clip.tokens);
  }
  config::write_file((fs::path(out_dir) / "spec.cfg").string(), spec.to_config());
}

CorpusSpec read_spec(const std::string& corpus_dir) {
  return CorpusSpec::from_config(
      config::parse_file((fs::path(corpus_dir) / "spec.cfg").string()));
}

std::vector<Clip> load_split(const std::string& corpus_dir, Split split) {
  CorpusSpec spec = read_spec(corpus_dir);
  fs::path dir = fs::path(corpus_dir) / split_name(split);
  if (!fs::exists(dir))
    throw IoError(IoErrorKind::open_failed, dir.string(), "missing split directory");
  std::vector<int64_t> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("clip_", 0) == 0 && entry.path().extension() == ".mtmo")
      ids.push_back(std::stoll(name.substr(5)));
  }
  std::sort(ids.begin(), ids.end());
  std::vector<Clip> out;
  for (int64_t id : ids) {
    Clip clip;
    clip.id = id;
    clip.speaker = id / spec.clips_per_speaker;
    std::string stem = (dir / ("clip_" + std::to_string(id))).string();
    clip.motion = motion::read_motion(stem + ".mtmo");
    auto audio = read_audio(stem + ".mtau");
    clip.audio = std::move(audio.samples);
    clip.audio_rate = audio.rate;
    clip.tokens = read_tokens(stem + ".txt");
    out.push_back(std::move(clip));
  }
  return out;
}

}  // namespace mtk::corpus
