#pragma once

// Rotations as unit quaternions, with the samplers and mesh index maps the
// training and evaluation loops need. A rotation remembers how it was drawn
// so diagnostics can report the provenance of each evaluation pose.
//
// Index maps realize a rotation as a gather on mesh nodes: the pulled-back
// value at node t comes from node argmax_j <R^-1 p_t, p_j>. When R is one of
// the mesh's exact symmetries the map is a permutation; for generic R it is
// the nearest-node approximation of the rotated field.

#include <array>
#include <cstdint>
#include <vector>

#include "icoseg/common.hpp"
#include "icoseg/icosphere.hpp"
#include "icoseg/rng.hpp"

namespace icoseg {

inline constexpr double kNearestTieTol = 1e-12;

enum class RotationProvenance : std::int32_t {
  identity = 0,
  axis_angle_capped = 1,
  uniform_quaternion = 2,
  zyx_euler = 3,
  icosahedral_group = 4,
};

struct Rotation {
  // Unit quaternion (w, x, y, z); q and -q act identically.
  std::array<double, 4> q{1.0, 0.0, 0.0, 0.0};
  RotationProvenance provenance = RotationProvenance::identity;

  static Rotation identity() { return {}; }
  static Rotation from_axis_angle(const Vec3& axis, double angle);

  Vec3 apply(const Vec3& v) const;
  Rotation inverse() const;
  // (a.compose(b)).apply(v) == a.apply(b.apply(v))
  Rotation compose(const Rotation& other) const;
  std::array<double, 9> matrix() const;  // row-major
  double angle() const;                  // in [0, pi]
};

// Axis from a normalized Gaussian triple, angle uniform in [0, max_angle].
Rotation sample_rotation_capped(double max_angle, RngState& rng);

// Uniform over SO(3): normalized 4D Gaussian quaternion.
Rotation sample_rotation_uniform(RngState& rng);

// R = Rz(yaw) * Ry(pitch) * Rx(roll), each angle uniform in [0, max].
Rotation sample_rotation_zyx(double yaw_max, double pitch_max, double roll_max,
                             RngState& rng);

// Pull-back gather map on one mesh: out[t] = argmax_j <R^-1 p_t, p_j>.
// Near-ties (within kNearestTieTol of the max) resolve to the lowest index.
std::vector<std::int32_t> nearest_index_map(const Rotation& r,
                                            const IcosphereMesh& mesh);

// Gather map for the reflection y -> -y, an exact symmetry of the mesh.
std::vector<std::int32_t> mirror_index_map(const IcosphereMesh& mesh);

// The 60 rotations mapping the icosahedron to itself: identity, 24 about
// vertex axes (+-72, +-144 degrees), 20 about face axes (+-120 degrees),
// 15 about edge axes (180 degrees).
std::vector<Rotation> icosahedral_rotation_group();

// Matched pull-back maps at the two ranks the model couples: idx_proj on the
// token mesh rotates backbone inputs, idx_img on the output mesh rotates
// full-resolution fields and prediction targets.
struct RotationMapSet {
  Rotation rotation;
  std::vector<std::int32_t> idx_proj;  // token mesh gather
  std::vector<std::int32_t> idx_img;   // output mesh gather
};

RotationMapSet build_rotation_maps(const Rotation& r,
                                   const IcosphereMesh& token_mesh,
                                   const IcosphereMesh& output_mesh);

void write_rotation_maps(const std::string& path, const RotationMapSet& maps);
RotationMapSet read_rotation_maps(const std::string& path);

}  // namespace icoseg
