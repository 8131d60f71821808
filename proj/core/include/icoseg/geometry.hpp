#pragma once

// Rotation-invariant edge geometry. For every node i and 1-ring neighbor j
// the cache stores the geodesic distance (with its radial bin decomposition)
// plus, per anchor a, the angle of j measured in the tangent frame that the
// anchor direction induces at i. All quantities depend only on relative
// positions, so rotating the whole mesh by a vertex-permuting symmetry
// permutes cache rows without changing their contents.

#include <cstdint>
#include <vector>

#include "icoseg/common.hpp"
#include "icoseg/icosphere.hpp"

namespace icoseg {

inline constexpr double kTangentEps = 1e-12;   // degenerate-projection clamp
inline constexpr double kAnchorTieQuantum = 1e-9;
inline constexpr int kDefaultAnchors = 3;      // F
inline constexpr int kDefaultBins = 16;        // B

// Arc length between two unit vectors, computed as 2*atan2(|p-q|, |p+q|),
// which stays accurate at both ends of [0, pi] and is exactly zero for
// identical inputs. Throws DataError when either input is not unit length
// within 1e-9.
double geodesic_distance(const Vec3& p, const Vec3& q);

struct TangentProjection {
  Vec3 direction{0.0, 0.0, 0.0};  // unit tangent at p toward q, if defined
  double magnitude = 0.0;         // norm of the raw projection
  bool degenerate = false;        // raw norm <= kTangentEps (q = +/- p)
};

// Projects q onto the tangent plane at p: q - (p.q) p, normalized.
TangentProjection tangent_project(const Vec3& p, const Vec3& q);

struct RelativeAngle {
  double alpha = 0.0;
  bool degenerate = false;
};

// Signed angle of neighbor j in the frame (t_a, p_i x t_a) at node i, where
// t_a is the tangent direction toward anchor a. Range (-pi, pi].
RelativeAngle relative_angle(const Vec3& p_i, const Vec3& p_j, const Vec3& p_a);

struct RadialBin {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;  // weight of hi; lo gets 1 - frac
};

// Linear bin coordinates for normalized distance delta_hat in [0, 1] over
// `bins` bins with centers at k/(bins-1). Throws ConfigError for bins < 2
// and DataError for delta_hat outside [0, 1].
RadialBin radial_bins(double delta_hat, int bins);

// Per-node anchors: the F ring neighbors with the largest tangent projection
// magnitude. Magnitudes are quantized to kAnchorTieQuantum before ranking and
// ties break toward the lower vertex index; rings with fewer than F usable
// neighbors repeat the last anchor. Returns a nodes x F row-major index array.
std::vector<std::int32_t> select_anchors(const IcosphereMesh& mesh,
                                         const NeighborTable& table,
                                         int anchors);

// Anchor tie closure. Ranking by quantized magnitude is deterministic, but
// when the F-th place is tied the index tie-break is arbitrary relative to
// the mesh's rotational symmetries: a rotation that permutes vertices can
// permute which tied neighbor "wins". Frame pooling must therefore average
// over every neighbor tied at the cutoff, weighted so the total anchor mass
// stays F (neighbors strictly above the cutoff get weight 1; the cutoff tie
// group shares the remainder). With no boundary tie this is exactly the
// plain top-F selection.
struct AnchorClosure {
  int anchors = 0;                       // F
  std::vector<std::int32_t> offset;      // nodes + 1
  std::vector<std::int32_t> index;       // closure candidates per node
  std::vector<double> weight;            // per candidate; sums to F per node
};
AnchorClosure select_anchor_closure(const IcosphereMesh& mesh,
                                    const NeighborTable& table, int anchors);

struct GeodesicCache {
  int rank = 0;
  std::size_t nodes = 0;
  int width = 0;    // K, matches the neighbor table
  int anchors = 0;  // F
  int bins = 0;     // B

  // Mirrors of the neighbor table layout (nodes * width).
  std::vector<std::int32_t> indices;
  std::vector<std::uint8_t> valid;

  std::vector<double> delta;      // nodes * width, radians
  std::vector<double> delta_hat;  // delta / pi
  std::vector<std::int32_t> bin_lo, bin_hi;  // nodes * width
  std::vector<double> bin_frac;              // nodes * width
  std::vector<std::int32_t> anchor_index;    // nodes * anchors
  std::vector<double> alpha;                 // nodes * width * anchors
  std::vector<std::uint8_t> degenerate;      // nodes * width (self or +/- p)

  // Tie-closure anchors used for frame pooling (see AnchorClosure).
  std::vector<std::int32_t> closure_offset;  // nodes + 1
  std::vector<std::int32_t> closure_index;   // candidate vertex ids
  std::vector<double> closure_weight;        // per candidate, sums to F
  std::vector<double> closure_alpha;         // candidate-major: cand * width

  std::size_t slot(std::size_t i, int k) const { return i * width + k; }
};

// Throws ConfigError for anchors < 1 or bins < 2.
GeodesicCache build_geodesic_cache(const IcosphereMesh& mesh,
                                   const NeighborTable& table,
                                   int anchors = kDefaultAnchors,
                                   int bins = kDefaultBins);

void write_geodesic_cache(const std::string& path, const GeodesicCache& cache);
GeodesicCache read_geodesic_cache(const std::string& path);

}  // namespace icoseg
