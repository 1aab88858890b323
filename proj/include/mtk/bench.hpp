#pragma once

#include <string>
#include <vector>

#include "mtk/synthesis.hpp"

// Latency measurements: the forward-only selective scan against a streaming
// quadratic attention baseline over a grid of sequence lengths, plus the
// per-module wall time of one generation pass normalized to a generated
// second. Timing uses the monotonic clock; repeats give mean and std.

namespace mtk::bench {

// least-squares goodness of fit for y ~ a + b*x and y ~ a + b*x + c*x^2
double r2_linear(const std::vector<double>& x, const std::vector<double>& y);
double r2_quadratic(const std::vector<double>& x, const std::vector<double>& y);

struct TimingRow {
  int64_t length = 0;
  double mean_s = 0;
  double std_s = 0;
  double median_s = 0;  // used for the scaling fits; robust to stray repeats
};

std::vector<TimingRow> time_scan(const std::vector<int64_t>& lengths,
                                 int64_t repeats, int64_t dim_e, int64_t dim_n,
                                 uint64_t seed);

// single-head scaled dot-product attention evaluated one query row at a
// time (O(M) memory, O(M^2) work)
std::vector<TimingRow> time_attention(const std::vector<int64_t>& lengths,
                                      int64_t repeats, int64_t dim, uint64_t seed);

struct ScalingReport {
  std::vector<TimingRow> scan;
  std::vector<TimingRow> attention;
  double scan_r2_linear = 0, scan_r2_quadratic = 0;
  double attn_r2_linear = 0, attn_r2_quadratic = 0;
};

ScalingReport scaling_report(const std::vector<int64_t>& lengths, int64_t repeats,
                             uint64_t seed);

struct ModuleRow {
  std::string name;
  double mean_s = 0;  // per generated second
  double std_s = 0;
};

// one row per pipeline module plus Total Time, all per generated second
std::vector<ModuleRow> module_report(const synth::Generator& gen,
                                     const std::array<vq::VqVae, 4>& vqs,
                                     const std::vector<double>& audio,
                                     const std::vector<int64_t>& tokens,
                                     int64_t speaker, int64_t repeats);

}  // namespace mtk::bench
