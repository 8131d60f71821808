// Shared helpers for the unit tests: random tensor fills, finite-difference
// scaffolding, and hand-built neighbor structures.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "icoseg/common.hpp"
#include "icoseg/geometry.hpp"
#include "icoseg/icosphere.hpp"
#include "icoseg/rng.hpp"

namespace testutil {

using icoseg::GeodesicCache;
using icoseg::Matrix;
using icoseg::NeighborTable;
using icoseg::RngState;

inline void fill_uniform(std::vector<double>& v, RngState& rng, double lo,
                         double hi) {
  for (double& x : v) x = rng.uniform(lo, hi);
}

inline void fill_uniform(Matrix& m, RngState& rng, double lo, double hi) {
  fill_uniform(m.a, rng, lo, hi);
}

inline void fill_uniform(Matrix& m, std::uint64_t seed, double lo, double hi) {
  RngState rng(seed);
  fill_uniform(m.a, rng, lo, hi);
}

// Norm-based relative error between two flat gradients.
inline double rel_err(const std::vector<double>& a,
                      const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(num) / denom;
}

// Central finite difference of a scalar function with respect to one slot.
inline double central_diff(double& slot, const std::function<double()>& f,
                           double h = 1e-5) {
  const double saved = slot;
  slot = saved + h;
  const double fp = f();
  slot = saved - h;
  const double fm = f();
  slot = saved;
  return (fp - fm) / (2.0 * h);
}

// Central-difference gradient of f with respect to every entry of `params`.
inline std::vector<double> fd_gradient(std::vector<double>& params,
                                       const std::function<double()>& f,
                                       double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    g[i] = central_diff(params[i], f, h);
  return g;
}

// Scalar probe: sum of elementwise product with a fixed random projection,
// so matrix-valued outputs reduce to a differentiable scalar.
inline double probe(const Matrix& y, const Matrix& r) {
  REQUIRE(y.rows == r.rows);
  REQUIRE(y.cols == r.cols);
  double s = 0.0;
  for (std::size_t i = 0; i < y.a.size(); ++i) s += y.a[i] * r.a[i];
  return s;
}

// Hand-built neighbor table; row k < 0 marks a padded slot.
inline NeighborTable make_table(std::size_t nodes, int width,
                                const std::vector<std::int32_t>& idx) {
  NeighborTable t;
  t.nodes = nodes;
  t.width = width;
  t.indices = idx;
  t.valid.resize(idx.size());
  for (std::size_t s = 0; s < idx.size(); ++s) t.valid[s] = idx[s] >= 0 ? 1 : 0;
  for (auto& i : t.indices)
    if (i < 0) i = 0;
  return t;
}

// Synthetic geometry cache with directly chosen angles and bins: every valid
// non-degenerate slot gets the same anchor count with unit closure weights.
// alpha is slot-major [node][slot][anchor].
inline GeodesicCache make_cache(const NeighborTable& table, int anchors,
                                int bins,
                                const std::vector<double>& delta_hat,
                                const std::vector<double>& alpha,
                                const std::vector<std::uint8_t>& degenerate) {
  GeodesicCache c;
  c.rank = 0;
  c.nodes = table.nodes;
  c.width = table.width;
  c.anchors = anchors;
  c.bins = bins;
  c.indices = table.indices;
  c.valid = table.valid;
  const std::size_t slots = c.nodes * static_cast<std::size_t>(c.width);
  REQUIRE(delta_hat.size() == slots);
  REQUIRE(alpha.size() == slots * static_cast<std::size_t>(anchors));
  REQUIRE(degenerate.size() == slots);
  c.delta_hat = delta_hat;
  c.delta.resize(slots);
  c.bin_lo.assign(slots, 0);
  c.bin_hi.assign(slots, 0);
  c.bin_frac.assign(slots, 0.0);
  c.alpha = alpha;
  c.degenerate = degenerate;
  for (std::size_t s = 0; s < slots; ++s) {
    c.delta[s] = delta_hat[s] * icoseg::kPi;
    if (!c.valid[s]) continue;
    const icoseg::RadialBin rb = icoseg::radial_bins(delta_hat[s], bins);
    c.bin_lo[s] = rb.lo;
    c.bin_hi[s] = rb.hi;
    c.bin_frac[s] = rb.frac;
  }
  // Closure: per node, the anchors of its first valid non-degenerate slot
  // stand in as node-level frames with weight 1, alpha copied per slot.
  c.closure_offset.assign(c.nodes + 1, 0);
  for (std::size_t i = 0; i < c.nodes; ++i) {
    for (int f = 0; f < anchors; ++f) {
      c.closure_index.push_back(0);
      c.closure_weight.push_back(1.0);
      for (int k = 0; k < c.width; ++k)
        c.closure_alpha.push_back(
            alpha[(i * c.width + k) * static_cast<std::size_t>(anchors) + f]);
    }
    c.closure_offset[i + 1] = static_cast<std::int32_t>(c.closure_index.size());
  }
  return c;
}

}  // namespace testutil
