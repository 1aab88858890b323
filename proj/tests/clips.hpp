#pragma once

#include <cmath>
#include <numbers>

#include "mtk/motion.hpp"
#include "mtk/rng.hpp"
#include "oracles.hpp"

// Hand-rolled full-body clips for unit tests: smooth per-joint rotations with
// valid Rot6D channels, sinusoidal face coefficients, stepped contacts and a
// slow translation drift.

namespace mtk::testing {

inline motion::MotionSequence make_test_clip(Rng& rng, int64_t frames, double fps = 30.0) {
  motion::MotionSequence m;
  m.frames = frames;
  m.dims = motion::kFullDim;
  m.fps = fps;
  m.data.assign(size_t(frames * motion::kFullDim), 0.0);

  constexpr int64_t joints = 55;
  std::vector<std::array<double, 3>> axes(joints);
  std::vector<double> amp(joints), freq(joints), phase(joints);
  for (int64_t j = 0; j < joints; ++j) {
    axes[size_t(j)] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    double n = std::sqrt(axes[size_t(j)][0] * axes[size_t(j)][0] +
                         axes[size_t(j)][1] * axes[size_t(j)][1] +
                         axes[size_t(j)][2] * axes[size_t(j)][2]);
    if (n < 0.1) axes[size_t(j)] = {1, 0, 0};
    amp[size_t(j)] = rng.uniform(0.2, 0.9);
    freq[size_t(j)] = rng.uniform(0.3, 1.5);
    phase[size_t(j)] = rng.uniform(0, 2 * std::numbers::pi);
  }
  for (int64_t t = 0; t < frames; ++t) {
    double sec = double(t) / fps;
    for (int64_t j = 0; j < joints; ++j) {
      double ang = amp[size_t(j)] * std::sin(2 * std::numbers::pi * freq[size_t(j)] * sec +
                                             phase[size_t(j)]);
      auto rot = axis_angle_matrix(axes[size_t(j)][0], axes[size_t(j)][1],
                                   axes[size_t(j)][2], ang);
      auto r6 = matrix_to_rot6d(rot);
      for (int64_t c = 0; c < 6; ++c) m.at(t, j * 6 + c) = r6[size_t(c)];
    }
    for (int64_t c = 0; c < motion::kFaceDim; ++c)
      m.at(t, motion::kFaceBegin + c) =
          0.3 * std::sin(2 * std::numbers::pi * (0.5 + 0.01 * double(c)) * sec + double(c));
    for (int64_t c = 0; c < motion::kContactDim; ++c)
      m.at(t, motion::kContactBegin + c) = (int64_t(sec * 2) + c) % 2 ? 1.0 : 0.0;
    for (int64_t c = 0; c < motion::kTranslationDim; ++c)
      m.at(t, motion::kTranslationBegin + c) = 0.1 * sec * double(c + 1) / 3.0;
  }
  return m;
}

}  // namespace mtk::testing
