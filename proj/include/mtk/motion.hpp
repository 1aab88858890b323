#pragma once

#include <array>
#include <string>

#include "mtk/array.hpp"

// Motion frames and the full-body channel layout.
//
// A frame has D = 55*6 + 4 + 3 + 100 = 437 channels, ordered so that every
// body part used by the pipeline is one contiguous block:
//
//   [  0,  78)  upper body, 13 joints in Rot6D
//   [ 78, 258)  hands,      30 joints in Rot6D
//   [258, 330)  lower body, 12 joints in Rot6D
//   [330, 334)  foot contact labels (4)
//   [334, 337)  root translation (3)
//   [337, 437)  face coefficients (100)
//
// The lower-body part slice spans [258, 337): its rotations plus the contact
// and translation channels that travel with it.

namespace mtk::motion {

inline constexpr int64_t kFullDim = 437;
inline constexpr int64_t kUpperJoints = 13;
inline constexpr int64_t kHandJoints = 30;
inline constexpr int64_t kLowerJoints = 12;
inline constexpr int64_t kFaceDim = 100;
inline constexpr int64_t kContactDim = 4;
inline constexpr int64_t kTranslationDim = 3;

inline constexpr int64_t kUpperBegin = 0;
inline constexpr int64_t kHandsBegin = kUpperJoints * 6;          // 78
inline constexpr int64_t kLowerBegin = kHandsBegin + kHandJoints * 6;  // 258
inline constexpr int64_t kContactBegin = kLowerBegin + kLowerJoints * 6;  // 330
inline constexpr int64_t kTranslationBegin = kContactBegin + kContactDim;  // 334
inline constexpr int64_t kFaceBegin = kTranslationBegin + kTranslationDim;  // 337

enum class BodyPart { face, upper, hands, lower };

inline constexpr std::array<BodyPart, 4> kAllParts = {
    BodyPart::face, BodyPart::upper, BodyPart::hands, BodyPart::lower};

// One part's contiguous channel block and its loss-relevant sub-structure.
struct PartInfo {
  int64_t begin = 0;          // offset within the 437-channel frame
  int64_t width = 0;          // channels in the slice
  int64_t rot_channels = 0;   // leading channels that are Rot6D groups
  int64_t contact_begin = 0;  // offset of contact channels within the slice (-1 none)
  int64_t contact_count = 0;
  bool is_face = false;       // face-style (MSE) velocity/acceleration terms
};

PartInfo part_info(BodyPart part);
const char* part_name(BodyPart part);
BodyPart part_from_name(const std::string& name);

struct MotionSequence {
  int64_t frames = 0;
  int64_t dims = 0;
  double fps = 30.0;
  std::vector<double> data;  // row-major frames x dims

  double at(int64_t t, int64_t c) const { return data[size_t(t * dims + c)]; }
  double& at(int64_t t, int64_t c) { return data[size_t(t * dims + c)]; }

  MotionSequence slice_channels(int64_t begin, int64_t width) const;
  MotionSequence part(BodyPart p) const;
  // (1, T, width) tape array of a channel block
  nd::Array to_array(int64_t begin, int64_t width) const;
};

// "MTMO": magic, version u16, fps u16, frames u32, dims u32, f32 payload
void write_motion(const std::string& path, const MotionSequence& m);
MotionSequence read_motion(const std::string& path);

// Gram-Schmidt Rot6D -> row-major 3x3 rotation. Rejects degenerate input
// (first vector near zero or the pair near parallel).
std::array<double, 9> rot6d_to_matrix(const std::array<double, 6>& r);

// Differentiable batch path used inside losses. Input (..., 6); returns the
// three orthonormal basis columns, each (..., 3). Normalizations carry an
// epsilon floor so near-degenerate predictions stay finite.
struct RotBasis {
  nd::Array b1, b2, b3;
};
RotBasis rot6d_basis(const nd::Array& r6, double eps = 1e-8);

// Mean geodesic angle between rotation batches given in Rot6D form; the
// arccos argument is clamped to +/-(1 - 1e-6). Result lies in [0, pi].
nd::Array geodesic_loss_rot6d(const nd::Array& a6, const nd::Array& b6);

// Same metric for explicit row-major matrices shaped (..., 9).
nd::Array geodesic_loss_mat(const nd::Array& a9, const nd::Array& b9);

}  // namespace mtk::motion
