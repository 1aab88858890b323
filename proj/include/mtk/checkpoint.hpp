#pragma once

#include <string>

#include "mtk/io.hpp"
#include "mtk/nn.hpp"

// Named-tensor checkpoint container used by both model formats:
//   "MTVQ" -- stage-1 motion autoencoders (tag byte = body part)
//   "MTG2" -- stage-2 generator           (tag byte = 0)
// Layout: magic[4], version u16, tag u8, count u32, then per tensor:
// name (u16 len + bytes), ndim u8, extents u32..., values f64 little-endian.

namespace mtk {

inline constexpr uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const char magic[4], uint8_t tag,
                     const nn::ParamMap& params);

struct RawCheckpoint {
  uint8_t tag = 0;
  std::vector<std::pair<std::string, nd::Array>> tensors;

  const nd::Array* find(const std::string& name) const {
    for (const auto& [n, a] : tensors)
      if (n == name) return &a;
    return nullptr;
  }
};

// Reads every tensor without requiring a prebuilt model.
RawCheckpoint read_checkpoint_raw(const std::string& path, const char magic[4]);

// Copies stored values into the matching entries of `params` (matched by
// name, shapes verified). Returns the tag byte. Missing or extra tensors and
// shape mismatches raise IoError(bad_data).
uint8_t load_checkpoint(const std::string& path, const char magic[4],
                        nn::ParamMap& params);

// Order-sensitive FNV-1a digest over every parameter's raw bytes. Used to
// assert that frozen models are untouched by later training stages.
uint64_t params_digest(const nn::ParamMap& params);

}  // namespace mtk
