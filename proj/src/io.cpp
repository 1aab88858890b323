#include "mtk/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mtk {

void ByteWriter::u16(uint16_t v) {
  u8(uint8_t(v & 0xff));
  u8(uint8_t(v >> 8));
}

void ByteWriter::u32(uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(uint8_t((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(uint8_t((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

void ByteWriter::bytes(const void* p, size_t n) {
  const char* c = static_cast<const char*>(p);
  buf_.insert(buf_.end(), c, c + n);
}

void ByteWriter::str(const std::string& s) {
  u16(uint16_t(s.size()));
  bytes(s.data(), s.size());
}

void ByteWriter::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path, "cannot open for writing");
  out.write(buf_.data(), std::streamsize(buf_.size()));
  if (!out) throw IoError(IoErrorKind::open_failed, path, "write failed");
}

ByteReader::ByteReader(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary | std::ios::ate);
  if (!in) throw IoError(IoErrorKind::open_failed, path_, "cannot open");
  auto n = in.tellg();
  in.seekg(0);
  buf_.resize(size_t(n));
  in.read(buf_.data(), n);
  if (!in) throw IoError(IoErrorKind::open_failed, path_, "read failed");
}

void ByteReader::need(size_t n) {
  if (pos_ + n > buf_.size())
    fail(IoErrorKind::truncated, "truncated: need " + std::to_string(pos_ + n) +
                                     " bytes, file has " + std::to_string(buf_.size()));
}

uint8_t ByteReader::u8() {
  need(1);
  return uint8_t(buf_[pos_++]);
}

uint16_t ByteReader::u16() {
  need(2);
  uint16_t v = uint16_t(uint8_t(buf_[pos_])) | uint16_t(uint8_t(buf_[pos_ + 1])) << 8;
  pos_ += 2;
  return v;
}

uint32_t ByteReader::u32() {
  need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf_[pos_ + size_t(i)])) << (8 * i);
  pos_ += 4;
  return v;
}

uint64_t ByteReader::u64() {
  need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf_[pos_ + size_t(i)])) << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  uint16_t n = u16();
  need(n);
  std::string s(buf_.data() + pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::expect_magic(const char magic[4]) {
  need(4);
  if (std::memcmp(buf_.data() + pos_, magic, 4) != 0)
    fail(IoErrorKind::magic_mismatch,
         std::string("bad magic, expected \"") + std::string(magic, 4) + "\"");
  pos_ += 4;
}

uint64_t fnv1a(const void* data, size_t n, uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace mtk
