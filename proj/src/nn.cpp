#include "mtk/nn.hpp"

#include <cmath>

namespace mtk::nn {

Linear::Linear(int64_t in, int64_t out, Rng& rng, bool bias) {
  double bound = 1.0 / std::sqrt(double(in));
  w = Array::uniform({in, out}, -bound, bound, rng, true);
  if (bias) b = Array::zeros({out}, true);
}

void Linear::params(const std::string& prefix, ParamMap& pm) const {
  pm.add(prefix + ".w", w);
  if (b.defined()) pm.add(prefix + ".b", b);
}

Conv1d::Conv1d(int64_t cin, int64_t cout, int64_t kernel, int64_t stride_,
               int64_t pad_l_, int64_t pad_r_, Rng& rng, bool bias)
    : stride(stride_), pad_l(pad_l_), pad_r(pad_r_) {
  double bound = 1.0 / std::sqrt(double(kernel * cin));
  w = Array::uniform({kernel, cin, cout}, -bound, bound, rng, true);
  if (bias) b = Array::zeros({cout}, true);
}

void Conv1d::params(const std::string& prefix, ParamMap& pm) const {
  pm.add(prefix + ".w", w);
  if (b.defined()) pm.add(prefix + ".b", b);
}

Embedding::Embedding(int64_t vocab, int64_t dim, Rng& rng) {
  double bound = 1.0 / std::sqrt(double(dim));
  table = Array::uniform({vocab, dim}, -bound, bound, rng, true);
}

void Embedding::params(const std::string& prefix, ParamMap& pm) const {
  pm.add(prefix + ".table", table);
}

}  // namespace mtk::nn
