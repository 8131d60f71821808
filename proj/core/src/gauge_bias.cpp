#include "icoseg/gauge_bias.hpp"

#include <cmath>

namespace icoseg {

FourierBiasTable FourierBiasTable::zeros(int heads, int order, int bins) {
  if (heads < 1) throw ConfigError("bias table requires heads >= 1");
  if (order < 0) throw ConfigError("bias table requires order >= 0");
  if (bins < 2) throw ConfigError("bias table requires bins >= 2");
  FourierBiasTable t;
  t.heads = heads;
  t.order = order;
  t.bins = bins;
  t.A.assign(static_cast<std::size_t>(heads) * (order + 1) * bins, 0.0);
  t.Bc.assign(t.A.size(), 0.0);
  return t;
}

BiasWorkspace build_bias_workspace(const GeodesicCache& cache, int order) {
  if (order < 0) throw ConfigError("bias workspace requires order >= 0");
  BiasWorkspace ws;
  ws.nodes = cache.nodes;
  ws.width = cache.width;
  ws.order = order;
  const std::size_t total =
      ws.nodes * static_cast<std::size_t>(ws.width) * (order + 1);
  ws.cos_sum.assign(total, 0.0);
  ws.sin_sum.assign(total, 0.0);

  // Average over the anchor tie closure (weights sum to F per node) and six
  // frame rotations. Ranking ties at the anchor cutoff would otherwise make
  // the pooled frame depend on vertex numbering, which rotations permute.
  const int F = cache.anchors;
  const double inv = 1.0 / (6.0 * static_cast<double>(F));
  for (std::size_t i = 0; i < cache.nodes; ++i) {
    const std::size_t cl_begin = cache.closure_offset[i];
    const std::size_t cl_end = cache.closure_offset[i + 1];
    for (int k = 0; k < cache.width; ++k) {
      const std::size_t s = cache.slot(i, k);
      if (!cache.valid[s]) continue;  // padded slots stay zero
      if (cache.degenerate[s]) {
        ws.cos_sum[ws.idx(i, k, 0)] = 1.0;
        continue;
      }
      for (std::size_t a = cl_begin; a < cl_end; ++a) {
        const double w = inv * cache.closure_weight[a];
        const double alpha = cache.closure_alpha[a * cache.width + k];
        for (int r = 0; r < 6; ++r) {
          const double shifted = alpha - 2.0 * kPi * r / 6.0;
          for (int m = 0; m <= order; ++m) {
            ws.cos_sum[ws.idx(i, k, m)] += w * std::cos(m * shifted);
            ws.sin_sum[ws.idx(i, k, m)] += w * std::sin(m * shifted);
          }
        }
      }
    }
  }
  return ws;
}

namespace {

void check_shapes(const FourierBiasTable& table, const GeodesicCache& cache,
                  const BiasWorkspace& ws) {
  if (table.bins != cache.bins)
    throw ConfigError("bias table bin count does not match geometry cache");
  if (ws.nodes != cache.nodes || ws.width != cache.width)
    throw ConfigError("bias workspace does not match geometry cache");
  if (ws.order != table.order)
    throw ConfigError("bias workspace order does not match table order");
}

}  // namespace

std::vector<double> eval_bias(const FourierBiasTable& table,
                              const GeodesicCache& cache,
                              const BiasWorkspace& ws) {
  check_shapes(table, cache, ws);
  const int H = table.heads;
  const int M = table.order;
  std::vector<double> out(
      cache.nodes * static_cast<std::size_t>(cache.width) * H, 0.0);

  for (std::size_t i = 0; i < cache.nodes; ++i) {
    for (int k = 0; k < cache.width; ++k) {
      const std::size_t s = cache.slot(i, k);
      if (!cache.valid[s]) continue;
      const int b0 = cache.bin_lo[s];
      const int b1 = cache.bin_hi[s];
      const double eta = cache.bin_frac[s];
      for (int h = 0; h < H; ++h) {
        double acc = 0.0;
        for (int m = 0; m <= M; ++m) {
          const double am = (1.0 - eta) * table.A[table.idx(h, m, b0)] +
                            eta * table.A[table.idx(h, m, b1)];
          const double bm = (1.0 - eta) * table.Bc[table.idx(h, m, b0)] +
                            eta * table.Bc[table.idx(h, m, b1)];
          acc += am * ws.cos_sum[ws.idx(i, k, m)] +
                 bm * ws.sin_sum[ws.idx(i, k, m)];
        }
        out[s * H + h] = acc;
      }
    }
  }
  return out;
}

void bias_backward(const FourierBiasTable& table, const GeodesicCache& cache,
                   const BiasWorkspace& ws, const std::vector<double>& upstream,
                   std::vector<double>& grad_A, std::vector<double>& grad_Bc) {
  check_shapes(table, cache, ws);
  const int H = table.heads;
  const int M = table.order;
  if (upstream.size() != cache.nodes * static_cast<std::size_t>(cache.width) * H)
    throw ConfigError("bias_backward: upstream gradient size mismatch");
  if (grad_A.size() != table.A.size() || grad_Bc.size() != table.Bc.size())
    throw ConfigError("bias_backward: gradient buffer size mismatch");

  for (std::size_t i = 0; i < cache.nodes; ++i) {
    for (int k = 0; k < cache.width; ++k) {
      const std::size_t s = cache.slot(i, k);
      if (!cache.valid[s]) continue;
      const int b0 = cache.bin_lo[s];
      const int b1 = cache.bin_hi[s];
      const double eta = cache.bin_frac[s];
      for (int h = 0; h < H; ++h) {
        const double g = upstream[s * H + h];
        if (g == 0.0) continue;
        for (int m = 0; m <= M; ++m) {
          const double cs = ws.cos_sum[ws.idx(i, k, m)];
          const double ss = ws.sin_sum[ws.idx(i, k, m)];
          grad_A[table.idx(h, m, b0)] += g * (1.0 - eta) * cs;
          grad_A[table.idx(h, m, b1)] += g * eta * cs;
          grad_Bc[table.idx(h, m, b0)] += g * (1.0 - eta) * ss;
          grad_Bc[table.idx(h, m, b1)] += g * eta * ss;
        }
      }
    }
  }
}

}  // namespace icoseg
