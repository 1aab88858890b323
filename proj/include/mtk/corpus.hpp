#pragma once

#include <string>
#include <vector>

#include "mtk/config.hpp"
#include "mtk/motion.hpp"

// Seeded synthetic paired corpus: audio, per-frame token ids and full-body
// motion per clip. Clips are built so their structure is measurable --
// impulse clicks set the rhythm, motion velocity dips at click times, so
// motion beats correlate with audio beats by construction. Everything is a
// pure function of (spec, clip id).

namespace mtk::corpus {

struct CorpusSpec {
  uint64_t seed = 1;
  int64_t speakers = 2;
  int64_t clips_per_speaker = 100;
  double clip_seconds = 8.0;
  int64_t fps = 30;
  int64_t audio_rate = 16000;
  int64_t vocab = 64;

  int64_t total_clips() const { return speakers * clips_per_speaker; }
  int64_t frames() const { return int64_t(clip_seconds * double(fps)); }
  int64_t samples() const { return int64_t(clip_seconds * double(audio_rate)); }

  config::Map to_config() const;
  static CorpusSpec from_config(const config::Map& m);
};

enum class Split { train, val, test };
const char* split_name(Split s);

struct SplitCounts {
  int64_t train = 0, val = 0, test = 0;
};
// 85% / 7.5% / 7.5%, rounded, remainder to test
SplitCounts split_counts(int64_t n);

// stable assignment: a seeded permutation of clip ids cut at the ratio marks
std::vector<Split> split_assignment(int64_t n, uint64_t seed);

struct Clip {
  int64_t id = 0;
  int64_t speaker = 0;
  motion::MotionSequence motion;
  std::vector<double> audio;
  int64_t audio_rate = 16000;
  std::vector<int64_t> tokens;  // one id per motion frame
};

// deterministic synthesis of one clip
Clip make_clip(const CorpusSpec& spec, int64_t clip_id);

// writes out_dir/{train,val,test}/clip_<id>.{mtmo,mtau,txt} plus spec.cfg
void generate_corpus(const CorpusSpec& spec, const std::string& out_dir);

// "MTAU": magic, rate u32, length u32, f32 samples
void write_audio(const std::string& path, const std::vector<double>& samples,
                 int64_t rate);
struct AudioFile {
  std::vector<double> samples;
  int64_t rate = 0;
};
AudioFile read_audio(const std::string& path);

// newline-delimited decimal ids, UTF-8
void write_tokens(const std::string& path, const std::vector<int64_t>& tokens);
std::vector<int64_t> read_tokens(const std::string& path);

// reads spec.cfg back from a generated corpus directory
CorpusSpec read_spec(const std::string& corpus_dir);

// loads every clip of one split (ids recovered from filenames)
std::vector<Clip> load_split(const std::string& corpus_dir, Split split);

}  // namespace mtk::corpus
