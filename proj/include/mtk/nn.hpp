#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mtk/array.hpp"

// Small trainable building blocks over the array engine. Weight init is
// uniform in +/- 1/sqrt(fan_in), biases start at zero.

namespace mtk::nn {

using nd::Array;

// Named parameter registry used for optimizers and checkpoints. Arrays are
// shared handles, so collected entries alias the module's own tensors.
class ParamMap {
 public:
  void add(std::string name, Array p) { items_.emplace_back(std::move(name), std::move(p)); }
  const std::vector<std::pair<std::string, Array>>& items() const { return items_; }
  std::vector<Array> arrays() const {
    std::vector<Array> out;
    out.reserve(items_.size());
    for (const auto& [_, a] : items_) out.push_back(a);
    return out;
  }

 private:
  std::vector<std::pair<std::string, Array>> items_;
};

struct Linear {
  Array w;  // (in, out)
  Array b;  // (out) when biased

  Linear() = default;
  Linear(int64_t in, int64_t out, Rng& rng, bool bias = true);

  Array operator()(const Array& x) const { return nd::linear(x, w, b); }
  void params(const std::string& prefix, ParamMap& pm) const;
};

struct Conv1d {
  Array w;  // (K, Cin, Cout)
  Array b;
  int64_t stride = 1;
  int64_t pad_l = 0;
  int64_t pad_r = 0;

  Conv1d() = default;
  Conv1d(int64_t cin, int64_t cout, int64_t kernel, int64_t stride, int64_t pad_l,
         int64_t pad_r, Rng& rng, bool bias = true);
  // symmetric padding
  Conv1d(int64_t cin, int64_t cout, int64_t kernel, int64_t stride, int64_t pad,
         Rng& rng, bool bias = true)
      : Conv1d(cin, cout, kernel, stride, pad, pad, rng, bias) {}

  Array operator()(const Array& x) const {
    return nd::conv1d(x, w, b, stride, pad_l, pad_r);
  }
  void params(const std::string& prefix, ParamMap& pm) const;
};

struct Embedding {
  Array table;  // (vocab, dim)

  Embedding() = default;
  Embedding(int64_t vocab, int64_t dim, Rng& rng);

  Array operator()(const std::vector<int64_t>& ids) const {
    return nd::gather_rows(table, ids);
  }
  int64_t vocab() const { return table.dim(0); }
  void params(const std::string& prefix, ParamMap& pm) const;
};

}  // namespace mtk::nn
