#pragma once

// Frame-pooled Fourier attention bias. Each head holds radial profiles
// A[m][b], Bc[m][b] over distance bins b and angular modes m = 0..order.
// The bias for an edge (i, j) averages cos/sin(m * (alpha - 2*pi*r/6)) over
// the six rotated copies of every anchor frame and over all anchors. That
// average depends only on the geometry, so it is precomputed once per mesh
// into a BiasWorkspace; evaluating the bias is then a dot product between
// the bin-interpolated profiles and the pooled trig sums.
//
// The six-fold pooling kills modes 1..5 identically (sixth roots of unity
// sum to zero), so only m = 0 and m = 6 (and multiples) can contribute; the
// algebra tests pin this down.

#include <cstdint>
#include <vector>

#include "icoseg/common.hpp"
#include "icoseg/geometry.hpp"
#include "icoseg/rng.hpp"

namespace icoseg {

inline constexpr int kDefaultFourierOrder = 6;  // M

struct FourierBiasTable {
  int heads = 0;  // H
  int order = 0;  // M, modes 0..M inclusive
  int bins = 0;   // B
  std::vector<double> A;   // heads * (order+1) * bins, cosine profiles
  std::vector<double> Bc;  // same shape, sine profiles

  std::size_t idx(int h, int m, int b) const {
    return (static_cast<std::size_t>(h) * (order + 1) + m) * bins + b;
  }

  // Zero-initialized table: the bias starts neutral and is learned.
  static FourierBiasTable zeros(int heads, int order, int bins);
};

struct BiasWorkspace {
  std::size_t nodes = 0;
  int width = 0;
  int order = 0;
  // nodes * width * (order+1); already averaged over anchors and the six
  // frame rotations. Degenerate slots keep only the m = 0 cosine term (= 1),
  // so their bias reduces to the radial A_0 profile. Padded slots are zero.
  std::vector<double> cos_sum;
  std::vector<double> sin_sum;

  std::size_t idx(std::size_t i, int k, int m) const {
    return (i * width + k) * static_cast<std::size_t>(order + 1) + m;
  }
};

BiasWorkspace build_bias_workspace(const GeodesicCache& cache, int order);

// Evaluates the bias for every (node, slot, head). Output is row-major
// nodes * width * heads; padded slots are exactly zero. Throws ConfigError
// when table/cache/workspace shapes disagree.
std::vector<double> eval_bias(const FourierBiasTable& table,
                              const GeodesicCache& cache,
                              const BiasWorkspace& ws);

// Accumulates d(loss)/dA and d(loss)/dBc given the upstream gradient with
// the same layout eval_bias produces. grad_A/grad_Bc must match table shape.
void bias_backward(const FourierBiasTable& table, const GeodesicCache& cache,
                   const BiasWorkspace& ws, const std::vector<double>& upstream,
                   std::vector<double>& grad_A, std::vector<double>& grad_Bc);

}  // namespace icoseg
