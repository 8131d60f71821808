#pragma once

// Cross-rank resampling between a fine and a coarse icosphere. Each fine
// node gets the coarse node(s) nearest by dot product. Midpoint vertices are
// exactly equidistant between two coarse endpoints, so nearest-parent ties
// are real and resolved twice over: the `parent` field records the lowest
// tied index (a deterministic hard assignment), while pooling and the
// upsample kernel split such nodes evenly across the tied set. The soft
// split is what keeps both resampling directions exactly equivariant under
// vertex-permuting rotations; a hard tie-break by index would not commute
// with relabeling. Ties are detected with a 1e-9 snap so floating-point
// noise cannot flip membership.
//
// geo = true:  downsample averages children with area*tie weights, upsample
//              blends the tied parents and their coarse 1-rings with a
//              Gaussian kernel in geodesic distance (width sigma; sigma = 0
//              selects the mean coarse edge length).
// geo = false: downsample is a plain mean over hard children, upsample
//              copies the hard parent's value.

#include <cstdint>
#include <string>
#include <vector>

#include "icoseg/common.hpp"
#include "icoseg/icosphere.hpp"

namespace icoseg {

inline constexpr double kParentTieTol = 1e-9;

struct RankTransfer {
  int fine_rank = 0, coarse_rank = 0;
  std::size_t fine_nodes = 0, coarse_nodes = 0;
  double sigma = 0.0;  // upsample kernel width actually used

  std::vector<std::int32_t> parent;      // fine_nodes, lowest tied index
  std::vector<std::int32_t> hard_count;  // coarse_nodes, children per parent

  // Tied parent sets, CSR over fine nodes; weight is 1/|tied|.
  std::vector<std::int32_t> tie_offset;  // fine_nodes + 1
  std::vector<std::int32_t> tie_index;
  std::vector<double> tie_weight;

  // Geodesic upsample kernel, CSR over fine nodes; weights sum to 1 per row.
  std::vector<std::int32_t> up_offset;  // fine_nodes + 1
  std::vector<std::int32_t> up_index;
  std::vector<double> up_weight;
};

// Requires fine.rank > coarse.rank. sigma = 0 picks the default width.
RankTransfer build_rank_transfer(const IcosphereMesh& fine,
                                 const IcosphereMesh& coarse,
                                 double sigma = 0.0);

// x: fine_nodes x C -> coarse_nodes x C. fine_omega are the fine mesh's
// area weights (used when geo is set).
Matrix downsample(const RankTransfer& t, const Matrix& x,
                  const std::vector<double>& fine_omega, bool geo);
Matrix downsample_backward(const RankTransfer& t, const Matrix& gy,
                           const std::vector<double>& fine_omega, bool geo);

// y: coarse_nodes x C -> fine_nodes x C.
Matrix upsample(const RankTransfer& t, const Matrix& y, bool geo);
Matrix upsample_backward(const RankTransfer& t, const Matrix& gz, bool geo);

void write_rank_transfer(const std::string& path, const RankTransfer& t);
RankTransfer read_rank_transfer(const std::string& path);

}  // namespace icoseg
