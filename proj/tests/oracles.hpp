#pragma once

#include <cmath>
#include <vector>

#include "mtk/array.hpp"

// Independent reference implementations used to pin expected values. These
// deliberately materialize the direct definitions (O(M^2) sums, nested-loop
// attention) and share no code with the library paths they check.

namespace mtk::testing {

// y_t[e] = sum_{k<=t} sum_n C_t[n] * (prod_{j=k+1..t} Abar_j[e,n]) * Bbar_k[e,n] * x_k[e]
inline std::vector<double> unrolled_scan(const std::vector<double>& a_bar,
                                         const std::vector<double>& b_bar,
                                         const std::vector<double>& c,
                                         const std::vector<double>& x,
                                         int64_t B, int64_t M, int64_t E, int64_t N) {
  std::vector<double> y(static_cast<size_t>(B * M * E), 0.0);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t t = 0; t < M; ++t)
      for (int64_t e = 0; e < E; ++e) {
        double acc = 0.0;
        for (int64_t k = 0; k <= t; ++k) {
          for (int64_t n = 0; n < N; ++n) {
            double prod = 1.0;
            for (int64_t j = k + 1; j <= t; ++j)
              prod *= a_bar[size_t(((b * M + j) * E + e) * N + n)];
            acc += c[size_t((b * M + t) * N + n)] * prod *
                   b_bar[size_t(((b * M + k) * E + e) * N + n)] *
                   x[size_t((b * M + k) * E + e)];
          }
        }
        y[size_t((b * M + t) * E + e)] = acc;
      }
  return y;
}

// Scaled dot-product attention straight from the definition, one scalar at a
// time. q: (Mq, D), k/v: (Mk, D), already projected; returns (Mq, D).
inline std::vector<double> reference_attention(const std::vector<double>& q,
                                               const std::vector<double>& k,
                                               const std::vector<double>& v,
                                               int64_t mq, int64_t mk, int64_t d) {
  std::vector<double> out(static_cast<size_t>(mq * d), 0.0);
  double scale = 1.0 / std::sqrt(double(d));
  for (int64_t i = 0; i < mq; ++i) {
    std::vector<double> scores(static_cast<size_t>(mk));
    double mx = -1e300;
    for (int64_t j = 0; j < mk; ++j) {
      double s = 0.0;
      for (int64_t c = 0; c < d; ++c)
        s += q[size_t(i * d + c)] * k[size_t(j * d + c)];
      scores[size_t(j)] = s * scale;
      mx = std::max(mx, scores[size_t(j)]);
    }
    double denom = 0.0;
    for (int64_t j = 0; j < mk; ++j) {
      scores[size_t(j)] = std::exp(scores[size_t(j)] - mx);
      denom += scores[size_t(j)];
    }
    for (int64_t j = 0; j < mk; ++j) {
      double w = scores[size_t(j)] / denom;
      for (int64_t c = 0; c < d; ++c)
        out[size_t(i * d + c)] += w * v[size_t(j * d + c)];
    }
  }
  return out;
}

// Rotation angle between two rotation matrices via quaternions: the relative
// rotation R = R1^T R2 has angle 2*atan2(|vec part|, |w|).
inline double quaternion_angle(const double r1[9], const double r2[9]) {
  double r[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += r1[k * 3 + i] * r2[k * 3 + j];
      r[i * 3 + j] = acc;
    }
  double tr = r[0] + r[4] + r[8];
  double w2 = std::max(0.0, (tr + 1.0) / 4.0);
  double x2 = std::max(0.0, (1.0 + r[0] - r[4] - r[8]) / 4.0);
  double y2 = std::max(0.0, (1.0 - r[0] + r[4] - r[8]) / 4.0);
  double z2 = std::max(0.0, (1.0 - r[0] - r[4] + r[8]) / 4.0);
  double w = std::sqrt(w2);
  double vec = std::sqrt(x2 + y2 + z2);
  return 2.0 * std::atan2(vec, w);
}

// Axis-angle to row-major rotation matrix (Rodrigues).
inline std::array<double, 9> axis_angle_matrix(double ax, double ay, double az,
                                               double angle) {
  double n = std::sqrt(ax * ax + ay * ay + az * az);
  ax /= n; ay /= n; az /= n;
  double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return {t * ax * ax + c,      t * ax * ay - s * az, t * ax * az + s * ay,
          t * ax * ay + s * az, t * ay * ay + c,      t * ay * az - s * ax,
          t * ax * az - s * ay, t * ay * az + s * ax, t * az * az + c};
}

// First two columns of a rotation matrix, the Rot6D encoding.
inline std::array<double, 6> matrix_to_rot6d(const std::array<double, 9>& r) {
  return {r[0], r[3], r[6], r[1], r[4], r[7]};
}

}  // namespace mtk::testing
