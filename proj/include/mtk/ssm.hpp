#pragma once

#include "mtk/nn.hpp"

// Selective state-space core. The recurrence
//   h_t = Abar_t (.) h_{t-1} + Bbar_t (.) x_t,   y_t = C_t . h_t
// runs over a diagonal state matrix A = -exp(a_log), with Delta, B and C
// produced from the input by learned projections (the S6 selection
// mechanism). The scan is a single fused op with a hand-written reverse
// sweep so the tape stays O(1) in sequence length.

namespace mtk::ssm {

using nd::Array;

// Projections that turn features into per-step SSM parameters.
struct SsmCore {
  int64_t dim_e = 0;  // feature channels (E)
  int64_t dim_n = 0;  // state size per channel (N)
  Array a_log;        // (E, N); A = -exp(a_log), entrywise negative
  nn::Linear proj_b;  // E -> N
  nn::Linear proj_c;  // E -> N
  nn::Linear proj_delta;  // E -> E, no bias; the learned bias is delta_bias
  Array delta_bias;       // (E)

  SsmCore() = default;
  SsmCore(int64_t e, int64_t n, Rng& rng);

  Array a() const { return nd::neg(nd::exp(a_log)); }
  void params(const std::string& prefix, nn::ParamMap& pm) const;
};

struct Selected {
  Array delta;  // (B, M, E), strictly positive
  Array b;      // (B, M, N)
  Array c;      // (B, M, N)
};

// delta = softplus(proj_delta(x) + delta_bias), b/c plain projections
Selected select_parameters(const Array& x, const SsmCore& core);

enum class Discretization {
  euler,  // Abar = exp(delta*A), Bbar = delta*B
  zoh,    // Abar = exp(delta*A), Bbar = phi1(delta*A) * delta*B (exact)
};

struct Discretized {
  Array a_bar;  // (B, M, E, N)
  Array b_bar;  // (B, M, E, N)
};

// delta: (B,M,E), a: (E,N) diagonal entries, b_mat: (B,M,N).
// Rejects nonpositive delta.
Discretized discretize(const Array& delta, const Array& a, const Array& b_mat,
                       Discretization mode);

// Fused linear recurrence. h_0 = Bbar_0 x_0 (no prior state); differentiable
// in all four operands.
Array scan(const Array& a_bar, const Array& b_bar, const Array& c_mat, const Array& x);

// Gated block: silu(conv(in_x(t))) -> selective scan -> * silu(in_z(t)) ->
// out projection + residual. Shape-preserving (B, M, D).
struct MambaBlock {
  int64_t dim_d = 0, dim_e = 0, dim_n = 0;
  nn::Linear in_x;   // D -> E
  nn::Linear in_z;   // D -> E
  nn::Conv1d conv;   // E -> E, kernel 4, causal left pad
  SsmCore core;
  nn::Linear out;    // E -> D

  MambaBlock() = default;
  MambaBlock(int64_t d, int64_t e, int64_t n, Rng& rng);

  Array operator()(const Array& tokens) const;
  void params(const std::string& prefix, nn::ParamMap& pm) const;
};

// Forward-only scan over raw buffers for latency measurements: one batch,
// reuses `h` (E*N) as scratch, writes y (M*E), returns max |h| seen.
double scan_kernel(int64_t m, int64_t e, int64_t n, const double* a_bar,
                   const double* b_bar, const double* c_mat, const double* x,
                   double* h, double* y);

}  // namespace mtk::ssm
