#include "mtk/checkpoint.hpp"

#include <map>

namespace mtk {

void save_checkpoint(const std::string& path, const char magic[4], uint8_t tag,
                     const nn::ParamMap& params) {
  ByteWriter w;
  w.bytes(magic, 4);
  w.u16(kCheckpointVersion);
  w.u8(tag);
  w.u32(uint32_t(params.items().size()));
  for (const auto& [name, arr] : params.items()) {
    w.str(name);
    w.u8(uint8_t(arr.ndim()));
    for (int64_t d : arr.shape()) w.u32(uint32_t(d));
    for (double v : arr.data()) w.f64(v);
  }
  w.write_file(path);
}

RawCheckpoint read_checkpoint_raw(const std::string& path, const char magic[4]) {
  ByteReader r(path);
  r.expect_magic(magic);
  uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    r.fail(IoErrorKind::bad_version,
           "unsupported checkpoint version " + std::to_string(version));
  RawCheckpoint out;
  out.tag = r.u8();
  uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    uint8_t ndim = r.u8();
    nd::Shape shape(ndim);
    for (uint8_t d = 0; d < ndim; ++d) shape[d] = int64_t(r.u32());
    int64_t n = nd::numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (auto& v : data) v = r.f64();
    if (out.find(name)) r.fail(IoErrorKind::bad_data, "duplicate tensor \"" + name + "\"");
    out.tensors.emplace_back(std::move(name),
                             nd::Array::from(std::move(shape), std::move(data)));
  }
  if (!r.at_end()) r.fail(IoErrorKind::bad_data, "trailing bytes after tensors");
  return out;
}

uint8_t load_checkpoint(const std::string& path, const char magic[4],
                        nn::ParamMap& params) {
  RawCheckpoint raw = read_checkpoint_raw(path, magic);
  if (raw.tensors.size() != params.items().size())
    throw IoError(IoErrorKind::bad_data, path,
                  "tensor count mismatch: file has " + std::to_string(raw.tensors.size()) +
                      ", model expects " + std::to_string(params.items().size()));
  for (const auto& [name, arr] : params.items()) {
    const nd::Array* stored = raw.find(name);
    if (!stored) throw IoError(IoErrorKind::bad_data, path, "missing tensor \"" + name + "\"");
    if (stored->shape() != arr.shape())
      throw IoError(IoErrorKind::bad_data, path,
                    "shape mismatch for \"" + name + "\": file " +
                        nd::shape_str(stored->shape()) + ", model " +
                        nd::shape_str(arr.shape()));
    const_cast<nd::Array&>(arr).mutable_data() = stored->data();
  }
  return raw.tag;
}

uint64_t params_digest(const nn::ParamMap& params) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, arr] : params.items()) {
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(arr.data().data(), arr.data().size() * sizeof(double), h);
  }
  return h;
}

}  // namespace mtk
