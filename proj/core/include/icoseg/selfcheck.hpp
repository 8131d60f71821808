#pragma once

// Built-in verification suite. Each check constructs its own small fixtures,
// pins its tolerances and wall-time budget as local constants, and reports
// the values it actually measured, so a failing one-line summary is already
// diagnosable. The CLI exposes the suite behind `selftest`; the acceptance
// harness reuses the same checks so the two can never drift apart.

#include <string>
#include <vector>

namespace icoseg {

struct CheckResult {
  std::string name;            // stable slug, e.g. "mesh-invariants"
  bool pass = false;           // all assertions held and the budget was met
  double seconds = 0.0;        // wall time spent inside the check
  double budget_seconds = 0.0; // exceeding this counts as failure
  std::string detail;          // measured values, tolerances, failure notes
};

// Icosphere structure: node/edge/face counts, Euler characteristic, total
// spherical area, and the normalization of the lumped area weights.
CheckResult check_mesh_invariants();

// Attention against an independently coded cosine-softmax reference, plus
// the closed-form split of attention between tied keys with area weights
// (2, 1), which must come out exactly (2/3, 1/3).
CheckResult check_attention_quadrature();

// Algebra of the six-fold frame pooling: low-order tables are immune to
// per-anchor frame rotation, a global sixty-degree shift never changes the
// output, and a pure sixth-harmonic table matches a brute-force sum.
CheckResult check_frame_pooling();

// Analytic gradients against central finite differences for attention
// (including the normalization and the clamped temperature), bias tables,
// cross-rank resampling, and the projection/forward/loss pipeline.
CheckResult check_gradients();

// The sixty rotations that map the icosahedron to itself: their node maps
// must be exact permutations with two-sided inverses, and a randomly
// initialized model must commute with them at the logit level unless the
// absolute-latitude encoding is enabled.
CheckResult check_rotation_equivariance();

// Consistency-loss contracts: exactly zero under the identity rotation,
// gradient flows only through the rotated branch (the target is frozen),
// and the reported total loss is seg + lambda * consistency with the
// configured default weight of 0.05.
CheckResult check_consistency_loss();

// All six checks in a fixed order. Exceptions inside a check are converted
// into a failure whose detail carries the message.
std::vector<CheckResult> run_all_checks();

}  // namespace icoseg
