#include "mtk/motion.hpp"

#include <cmath>
#include <stdexcept>

#include "mtk/io.hpp"

namespace mtk::motion {

PartInfo part_info(BodyPart part) {
  switch (part) {
    case BodyPart::face:
      return {kFaceBegin, kFaceDim, 0, -1, 0, true};
    case BodyPart::upper:
      return {kUpperBegin, kUpperJoints * 6, kUpperJoints * 6, -1, 0, false};
    case BodyPart::hands:
      return {kHandsBegin, kHandJoints * 6, kHandJoints * 6, -1, 0, false};
    case BodyPart::lower:
      // rotations, then contacts, then translation
      return {kLowerBegin, kLowerJoints * 6 + kContactDim + kTranslationDim,
              kLowerJoints * 6, kLowerJoints * 6, kContactDim, false};
  }
  throw std::invalid_argument("unknown body part");
}

const char* part_name(BodyPart part) {
  switch (part) {
    case BodyPart::face: return "face";
    case BodyPart::upper: return "upper";
    case BodyPart::hands: return "hands";
    case BodyPart::lower: return "lower";
  }
  return "?";
}

BodyPart part_from_name(const std::string& name) {
  for (BodyPart p : kAllParts)
    if (name == part_name(p)) return p;
  throw std::invalid_argument("unknown body part \"" + name + "\"");
}

MotionSequence MotionSequence::slice_channels(int64_t begin, int64_t width) const {
  if (begin < 0 || begin + width > dims)
    throw std::invalid_argument("channel slice out of range");
  MotionSequence out;
  out.frames = frames;
  out.dims = width;
  out.fps = fps;
  out.data.resize(size_t(frames * width));
  for (int64_t t = 0; t < frames; ++t)
    std::copy(data.begin() + t * dims + begin, data.begin() + t * dims + begin + width,
              out.data.begin() + t * width);
  return out;
}

MotionSequence MotionSequence::part(BodyPart p) const {
  auto info = part_info(p);
  return slice_channels(info.begin, info.width);
}

nd::Array MotionSequence::to_array(int64_t begin, int64_t width) const {
  auto s = slice_channels(begin, width);
  return nd::Array::from({1, frames, width}, std::move(s.data));
}

void write_motion(const std::string& path, const MotionSequence& m) {
  ByteWriter w;
  w.bytes("MTMO", 4);
  w.u16(1);
  w.u16(uint16_t(m.fps));
  w.u32(uint32_t(m.frames));
  w.u32(uint32_t(m.dims));
  for (double v : m.data) w.f32(float(v));
  w.write_file(path);
}

MotionSequence read_motion(const std::string& path) {
  ByteReader r(path);
  r.expect_magic("MTMO");
  uint16_t version = r.u16();
  if (version != 1)
    r.fail(IoErrorKind::bad_version, "unsupported motion version " + std::to_string(version));
  MotionSequence m;
  m.fps = double(r.u16());
  m.frames = int64_t(r.u32());
  m.dims = int64_t(r.u32());
  size_t expect = size_t(m.frames * m.dims);
  if (r.remaining() != expect * 4)
    r.fail(IoErrorKind::truncated,
           "payload size mismatch: expected " + std::to_string(expect * 4) +
               " bytes, have " + std::to_string(r.remaining()));
  m.data.resize(expect);
  for (auto& v : m.data) v = double(r.f32());
  return m;
}

std::array<double, 9> rot6d_to_matrix(const std::array<double, 6>& r) {
  const double* a1 = r.data();
  const double* a2 = r.data() + 3;
  double n1 = std::sqrt(a1[0] * a1[0] + a1[1] * a1[1] + a1[2] * a1[2]);
  if (n1 < 1e-8) throw std::invalid_argument("rot6d: first vector is near zero");
  double b1[3] = {a1[0] / n1, a1[1] / n1, a1[2] / n1};
  double dot = b1[0] * a2[0] + b1[1] * a2[1] + b1[2] * a2[2];
  double u[3] = {a2[0] - dot * b1[0], a2[1] - dot * b1[1], a2[2] - dot * b1[2]};
  double nu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  if (nu < 1e-8) throw std::invalid_argument("rot6d: vectors are near parallel");
  double b2[3] = {u[0] / nu, u[1] / nu, u[2] / nu};
  double b3[3] = {b1[1] * b2[2] - b1[2] * b2[1], b1[2] * b2[0] - b1[0] * b2[2],
                  b1[0] * b2[1] - b1[1] * b2[0]};
  // columns b1, b2, b3
  return {b1[0], b2[0], b3[0], b1[1], b2[1], b3[1], b1[2], b2[2], b3[2]};
}

namespace {

using nd::Array;

Array dot_last(const Array& a, const Array& b) {
  return nd::sum_axis(nd::mul(a, b), -1, true);
}

Array safe_normalize(const Array& v, double eps) {
  Array norm = nd::sqrt(nd::add_scalar(dot_last(v, v), eps * eps));
  return nd::div(v, norm);
}

Array cross3(const Array& a, const Array& b) {
  auto ax = nd::slice(a, -1, 0, 1), ay = nd::slice(a, -1, 1, 1), az = nd::slice(a, -1, 2, 1);
  auto bx = nd::slice(b, -1, 0, 1), by = nd::slice(b, -1, 1, 1), bz = nd::slice(b, -1, 2, 1);
  auto cx = nd::sub(nd::mul(ay, bz), nd::mul(az, by));
  auto cy = nd::sub(nd::mul(az, bx), nd::mul(ax, bz));
  auto cz = nd::sub(nd::mul(ax, by), nd::mul(ay, bx));
  return nd::concat({cx, cy, cz}, -1);
}

}  // namespace

RotBasis rot6d_basis(const nd::Array& r6, double eps) {
  if (r6.dim(-1) != 6) throw std::invalid_argument("rot6d_basis: last axis must be 6");
  Array a1 = nd::slice(r6, -1, 0, 3);
  Array a2 = nd::slice(r6, -1, 3, 3);
  RotBasis basis;
  basis.b1 = safe_normalize(a1, eps);
  Array proj = nd::mul(dot_last(basis.b1, a2), basis.b1);
  basis.b2 = safe_normalize(nd::sub(a2, proj), eps);
  basis.b3 = cross3(basis.b1, basis.b2);
  return basis;
}

nd::Array geodesic_loss_rot6d(const nd::Array& a6, const nd::Array& b6) {
  RotBasis ra = rot6d_basis(a6);
  RotBasis rb = rot6d_basis(b6);
  // trace(Ra^T Rb) = b1a.b1b + b2a.b2b + b3a.b3b
  Array trace = nd::add(nd::add(dot_last(ra.b1, rb.b1), dot_last(ra.b2, rb.b2)),
                        dot_last(ra.b3, rb.b3));
  Array cosang = nd::mul_scalar(nd::add_scalar(trace, -1.0), 0.5);
  return nd::mean(nd::acos_clamped(cosang, 1e-6));
}

nd::Array geodesic_loss_mat(const nd::Array& a9, const nd::Array& b9) {
  if (a9.dim(-1) != 9) throw std::invalid_argument("geodesic_loss_mat: last axis must be 9");
  Array trace = nd::sum_axis(nd::mul(a9, b9), -1, true);
  Array cosang = nd::mul_scalar(nd::add_scalar(trace, -1.0), 0.5);
  return nd::mean(nd::acos_clamped(cosang, 1e-6));
}

}  // namespace mtk::motion
