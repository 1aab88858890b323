#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mtk/corpus.hpp"
#include "mtk/io.hpp"
#include "mtk/motion.hpp"

using namespace mtk;
namespace fs = std::filesystem;

namespace {

corpus::CorpusSpec tiny_spec() {
  corpus::CorpusSpec s;
  s.seed = 21;
  s.speakers = 2;
  s.clips_per_speaker = 2;
  s.clip_seconds = 2.0;
  return s;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("split ratios and stability") {
  auto c = corpus::split_counts(40);
  CHECK(c.train == 34);
  CHECK(c.val == 3);
  CHECK(c.test == 3);

  auto a1 = corpus::split_assignment(40, 7);
  auto a2 = corpus::split_assignment(40, 7);
  CHECK(a1 == a2);
  int64_t train = 0, val = 0, test = 0;
  for (auto s : a1) {
    if (s == corpus::Split::train) ++train;
    if (s == corpus::Split::val) ++val;
    if (s == corpus::Split::test) ++test;
  }
  CHECK(train == 34);
  CHECK(val == 3);
  CHECK(test == 3);
}

TEST_CASE("clip synthesis is deterministic and well-formed") {
  auto spec = tiny_spec();
  auto c1 = corpus::make_clip(spec, 3);
  auto c2 = corpus::make_clip(spec, 3);
  CHECK(c1.motion.data == c2.motion.data);
  CHECK(c1.audio == c2.audio);
  CHECK(c1.tokens == c2.tokens);
  CHECK(c1.speaker == 1);

  CHECK(c1.motion.frames == spec.frames());
  CHECK(c1.motion.dims == motion::kFullDim);
  CHECK(int64_t(c1.audio.size()) == spec.samples());
  CHECK(int64_t(c1.tokens.size()) == spec.frames());
  for (int64_t t : c1.tokens) {
    CHECK(t >= 0);
    CHECK(t < spec.vocab);
  }

  // every Rot6D channel pair converts to a valid rotation
  for (int64_t t = 0; t < c1.motion.frames; t += 7)
    for (int64_t j = 0; j < 55; ++j) {
      std::array<double, 6> r6;
      for (int64_t k = 0; k < 6; ++k) r6[size_t(k)] = c1.motion.at(t, j * 6 + k);
      CHECK_NOTHROW(motion::rot6d_to_matrix(r6));
    }
}

TEST_CASE("corpus generation round-trips byte-identically") {
  auto spec = tiny_spec();
  fs::path dir1 = fs::temp_directory_path() / "mtk_corpus_a";
  fs::path dir2 = fs::temp_directory_path() / "mtk_corpus_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  corpus::generate_corpus(spec, dir1.string());
  corpus::generate_corpus(spec, dir2.string());

  int64_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir1)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    fs::path rel = fs::relative(entry.path(), dir1);
    CHECK(slurp(entry.path()) == slurp(dir2 / rel));
  }
  CHECK(files == 3 * spec.total_clips() + 1);  // three files per clip + spec.cfg

  // loader returns what the generator wrote (modulo the f32 payload)
  auto spec_back = corpus::read_spec(dir1.string());
  CHECK(spec_back.total_clips() == spec.total_clips());
  auto train = corpus::load_split(dir1.string(), corpus::Split::train);
  auto counts = corpus::split_counts(spec.total_clips());
  CHECK(int64_t(train.size()) == counts.train);
  for (const auto& clip : train) {
    CHECK(clip.motion.frames == spec.frames());
    CHECK(int64_t(clip.tokens.size()) == spec.frames());
  }
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("file formats: exact round-trip and distinguished errors") {
  fs::path dir = fs::temp_directory_path() / "mtk_corpus_io";
  fs::create_directories(dir);

  // motion round-trip is exact for f32-representable data
  motion::MotionSequence m;
  m.frames = 3;
  m.dims = 2;
  m.fps = 30;
  m.data = {0.5, -1.25, 2.0, 0.0, 100.0, -0.0078125};
  auto mpath = (dir / "m.mtmo").string();
  motion::write_motion(mpath, m);
  auto m2 = motion::read_motion(mpath);
  CHECK(m2.data == m.data);
  CHECK(m2.fps == m.fps);

  // audio round-trip
  std::vector<double> samples = {0.0, 0.25, -0.5, 1.0};
  auto apath = (dir / "a.mtau").string();
  corpus::write_audio(apath, samples, 16000);
  auto a2 = corpus::read_audio(apath);
  CHECK(a2.samples == samples);
  CHECK(a2.rate == 16000);

  // tokens round-trip
  std::vector<int64_t> toks = {0, 63, 17, 17, 2};
  auto tpath = (dir / "t.txt").string();
  corpus::write_tokens(tpath, toks);
  CHECK(corpus::read_tokens(tpath) == toks);

  // corrupted magic
  {
    std::ofstream f(mpath, std::ios::binary);
    f << "XXXX rest of the file";
  }
  try {
    motion::read_motion(mpath);
    CHECK(false);
  } catch (const IoError& e) {
    CHECK(e.kind() == IoErrorKind::magic_mismatch);
  }

  // truncated payload reports expected vs actual byte counts
  motion::write_motion(mpath, m);
  auto bytes = slurp(mpath);
  bytes.resize(bytes.size() - 5);
  {
    std::ofstream f(mpath, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), std::streamsize(bytes.size()));
  }
  try {
    motion::read_motion(mpath);
    CHECK(false);
  } catch (const IoError& e) {
    CHECK(e.kind() == IoErrorKind::truncated);
    CHECK(std::string(e.what()).find("expected") != std::string::npos);
  }

  // unsupported version
  motion::write_motion(mpath, m);
  bytes = slurp(mpath);
  bytes[4] = 9;  // version low byte
  {
    std::ofstream f(mpath, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), std::streamsize(bytes.size()));
  }
  try {
    motion::read_motion(mpath);
    CHECK(false);
  } catch (const IoError& e) {
    CHECK(e.kind() == IoErrorKind::bad_version);
  }

  // token junk
  {
    std::ofstream f(tpath, std::ios::trunc);
    f << "12\nnot_a_number\n";
  }
  try {
    corpus::read_tokens(tpath);
    CHECK(false);
  } catch (const IoError& e) {
    CHECK(e.kind() == IoErrorKind::bad_data);
  }

  fs::remove_all(dir);
}
