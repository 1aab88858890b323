#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtk {

enum class IoErrorKind {
  open_failed,
  magic_mismatch,
  truncated,
  bad_version,
  bad_data,
};

class IoError : public std::runtime_error {
 public:
  IoError(IoErrorKind kind, std::string path, std::string detail)
      : std::runtime_error(path + ": " + detail), kind_(kind), path_(std::move(path)) {}
  IoErrorKind kind() const { return kind_; }
  const std::string& path() const { return path_; }

 private:
  IoErrorKind kind_;
  std::string path_;
};

// Little-endian byte buffer codec. All on-disk formats in this project are
// explicitly little-endian regardless of host order.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(char(v)); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(const void* p, size_t n);
  void str(const std::string& s);  // u16 length + bytes

  const std::vector<char>& buffer() const { return buf_; }
  void write_file(const std::string& path) const;

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  // loads the whole file; throws IoError(open_failed)
  ByteReader(std::string path);

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  std::string str();
  void expect_magic(const char magic[4]);
  size_t remaining() const { return buf_.size() - pos_; }
  bool at_end() const { return pos_ == buf_.size(); }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(IoErrorKind kind, const std::string& detail) const {
    throw IoError(kind, path_, detail);
  }

 private:
  void need(size_t n);
  std::string path_;
  std::vector<char> buf_;
  size_t pos_ = 0;
};

// FNV-1a over a byte range; used for config hashes and frozen-parameter checks
uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace mtk
