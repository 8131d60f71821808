#pragma once

// Icosphere construction by repeated midpoint subdivision of a regular
// icosahedron, with every vertex reprojected to the unit sphere.
//
// Vertex ordering is rank-stable: the 12 base vertices come first, and each
// subdivision appends midpoints in the order their (lo, hi) parent edge is
// first encountered while walking faces in order. The first V(r-1) vertices
// of a rank-r mesh are therefore exactly the rank-(r-1) mesh, which the
// cross-rank transfer code depends on.
//
// Base orientation: vertex 0 at the north pole (0,0,1), an upper ring at
// latitude atan(1/2) with longitudes 72k degrees, a lower ring at latitude
// -atan(1/2) offset by 36 degrees, vertex 11 at the south pole. With this
// placement yaw by multiples of 72 degrees and the reflection y -> -y map
// the vertex set to itself exactly, which the augmentation code exploits.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "icoseg/common.hpp"

namespace icoseg {

inline constexpr int kMaxMeshRank = 7;
inline constexpr int kNeighborWidth = 7;  // self + at most 6 ring neighbors

struct IcosphereMesh {
  int rank = 0;
  std::vector<Vec3> vertices;                         // unit vectors
  std::vector<std::array<std::int32_t, 3>> faces;     // outward oriented
  std::vector<std::vector<std::int32_t>> neighbors;   // 1-ring, ascending
  std::vector<double> area_weights;                   // mean-normalized
  double raw_area_sum = 0.0;                          // before normalization

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  std::size_t edge_count() const;  // derived from faces

  // Expected counts for a given rank: V = 10*4^r + 2, F = 20*4^r, E = 30*4^r.
  static std::size_t expected_vertices(int rank);
  static std::size_t expected_faces(int rank);
  static std::size_t expected_edges(int rank);
};

// Fixed-width neighborhood view: row i starts with node i itself, followed
// by its 1-ring sorted ascending by index; unused slots (degree-5 vertices)
// are masked out via valid = 0.
struct NeighborTable {
  std::size_t nodes = 0;
  int width = kNeighborWidth;
  std::vector<std::int32_t> indices;  // nodes * width
  std::vector<std::uint8_t> valid;    // nodes * width

  std::int32_t at(std::size_t i, int k) const { return indices[i * width + k]; }
  bool is_valid(std::size_t i, int k) const { return valid[i * width + k] != 0; }
};

// Spherical area of the triangle (a, b, c) on the unit sphere (L'Huilier-free
// form: E = 2*atan2(|a.(b x c)|, 1 + a.b + b.c + c.a)). Throws DataError for
// degenerate triangles.
double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// Builds the rank-r mesh. Throws ConfigError when rank < 0 or rank > max_rank.
IcosphereMesh build_icosphere(int rank, int max_rank = kMaxMeshRank);

// Barycentric-lumped vertex areas: each spherical face contributes a third
// of its area to each corner. Returned weights are normalized to mean 1;
// raw_sum_out (if non-null) receives the un-normalized total, which must
// equal 4*pi up to rounding.
std::vector<double> compute_area_weights(const IcosphereMesh& mesh,
                                         double* raw_sum_out = nullptr);

NeighborTable build_neighbor_table(const IcosphereMesh& mesh);

void write_mesh(const std::string& path, const IcosphereMesh& mesh);
IcosphereMesh read_mesh(const std::string& path);

}  // namespace icoseg
