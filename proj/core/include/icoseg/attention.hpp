#pragma once

// Local multi-head attention over 1-ring neighborhoods. Queries and keys are
// L2-normalized per head, so logits are cosine similarities scaled by a
// learned per-head temperature tau = exp(s) clamped at 100 (the clamp has a
// zero subgradient, matching the forward exactly). Each logit can carry an
// additive geometric bias and, when quadrature weighting is enabled, the log
// of the neighbor's area weight, which makes the softmax approximate an
// area-weighted integral. Padded neighbor slots contribute -inf logits and
// receive exactly zero attention.
//
// Forward saves everything backward needs into an AttentionCtx; gradients
// are accumulated into the parameter .g* buffers and the returned input
// gradient. The backward pass is checked against central finite differences
// in the test suite.

#include <cstdint>
#include <vector>

#include "icoseg/common.hpp"
#include "icoseg/icosphere.hpp"
#include "icoseg/rng.hpp"

namespace icoseg {

inline constexpr double kTauMax = 100.0;
inline constexpr double kNormEps = 1e-12;   // q/k normalization guard
inline constexpr double kOmegaFloor = 1e-12;

// Glorot-uniform fill: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void glorot_fill(std::vector<double>& w, int fan_in, int fan_out,
                 RngState& rng);

struct AttentionParams {
  int heads = 0;     // H
  int dim = 0;       // D
  int head_dim = 0;  // D / H

  // Per-head projections, stored head-major: head h occupies the slice
  // [h*dim*head_dim, (h+1)*dim*head_dim), each a dim x head_dim matrix.
  std::vector<double> wq, wk, wv;
  std::vector<double> wo;  // dim x dim, applied to the head concat
  std::vector<double> s;   // per-head log temperature, init log(10)

  std::vector<double> gwq, gwk, gwv, gwo, gs;

  static AttentionParams init(int heads, int dim, RngState& rng);
  void zero_grad();
  const double* head_w(const std::vector<double>& w, int h) const {
    return w.data() + static_cast<std::size_t>(h) * dim * head_dim;
  }
};

struct AttentionOptions {
  bool use_quadrature = true;  // add log(area weight) to logits
};

struct AttentionCtx {
  Matrix x;                           // input, L x D
  std::vector<Matrix> qraw, q, kraw, k, v;  // per head, L x head_dim
  std::vector<Matrix> attn, u;        // per head, L x width
  Matrix concat;                      // L x D, pre-output-projection
};

// x: L x D node features. bias: optional nodes*width*heads additive logits.
// omega: per-node area weights (length L). Throws DataError on non-finite
// inputs or non-positive area weights, ConfigError on shape mismatches.
Matrix attention_forward(const Matrix& x, const AttentionParams& p,
                         const NeighborTable& table,
                         const std::vector<double>* bias,
                         const std::vector<double>& omega,
                         const AttentionOptions& opts, AttentionCtx* ctx);

// Accumulates parameter gradients into p.g*, optionally accumulates the
// bias gradient (layout nodes*width*heads), and returns d(loss)/dx.
Matrix attention_backward(AttentionParams& p, const AttentionCtx& ctx,
                          const NeighborTable& table, const Matrix& gy,
                          const AttentionOptions& opts,
                          std::vector<double>* gbias);

}  // namespace icoseg
