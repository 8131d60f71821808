#include "icoseg/so3.hpp"

#include <algorithm>
#include <cmath>

#include "icoseg/container.hpp"

namespace icoseg {

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 u = normalized(axis);
  Rotation r;
  const double half = 0.5 * angle;
  const double s = std::sin(half);
  r.q = {std::cos(half), s * u[0], s * u[1], s * u[2]};
  r.provenance = RotationProvenance::axis_angle_capped;
  return r;
}

Vec3 Rotation::apply(const Vec3& v) const {
  // v' = v + 2w (u x v) + 2 u x (u x v), u = (x, y, z)
  const Vec3 u{q[1], q[2], q[3]};
  const Vec3 t = cross(u, v);
  const Vec3 t2 = cross(u, t);
  return {v[0] + 2.0 * (q[0] * t[0] + t2[0]),
          v[1] + 2.0 * (q[0] * t[1] + t2[1]),
          v[2] + 2.0 * (q[0] * t[2] + t2[2])};
}

Rotation Rotation::inverse() const {
  Rotation r = *this;
  r.q = {q[0], -q[1], -q[2], -q[3]};
  return r;
}

Rotation Rotation::compose(const Rotation& o) const {
  Rotation r;
  r.q = {q[0] * o.q[0] - q[1] * o.q[1] - q[2] * o.q[2] - q[3] * o.q[3],
         q[0] * o.q[1] + q[1] * o.q[0] + q[2] * o.q[3] - q[3] * o.q[2],
         q[0] * o.q[2] - q[1] * o.q[3] + q[2] * o.q[0] + q[3] * o.q[1],
         q[0] * o.q[3] + q[1] * o.q[2] - q[2] * o.q[1] + q[3] * o.q[0]};
  // Renormalize to hold unit length under long composition chains.
  double n = 0.0;
  for (double c : r.q) n += c * c;
  n = std::sqrt(n);
  for (double& c : r.q) c /= n;
  r.provenance = provenance;
  return r;
}

std::array<double, 9> Rotation::matrix() const {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
          2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
}

double Rotation::angle() const {
  return 2.0 * std::acos(std::clamp(std::abs(q[0]), 0.0, 1.0));
}

Rotation sample_rotation_capped(double max_angle, RngState& rng) {
  if (max_angle < 0.0) throw ConfigError("rotation cap must be non-negative");
  const Vec3 axis = rng.unit_vector();
  const double angle = rng.uniform(0.0, max_angle);
  Rotation r = Rotation::from_axis_angle(axis, angle);
  r.provenance = RotationProvenance::axis_angle_capped;
  return r;
}

Rotation sample_rotation_uniform(RngState& rng) {
  for (;;) {
    std::array<double, 4> g{rng.normal(), rng.normal(), rng.normal(),
                            rng.normal()};
    double n = 0.0;
    for (double c : g) n += c * c;
    n = std::sqrt(n);
    if (n <= 1e-12) continue;
    Rotation r;
    for (int i = 0; i < 4; ++i) r.q[i] = g[i] / n;
    r.provenance = RotationProvenance::uniform_quaternion;
    return r;
  }
}

Rotation sample_rotation_zyx(double yaw_max, double pitch_max, double roll_max,
                             RngState& rng) {
  if (yaw_max < 0.0 || pitch_max < 0.0 || roll_max < 0.0)
    throw ConfigError("euler angle ranges must be non-negative");
  const double yaw = rng.uniform(0.0, yaw_max);
  const double pitch = rng.uniform(0.0, pitch_max);
  const double roll = rng.uniform(0.0, roll_max);
  const Rotation rz = Rotation::from_axis_angle({0, 0, 1}, yaw);
  const Rotation ry = Rotation::from_axis_angle({0, 1, 0}, pitch);
  const Rotation rx = Rotation::from_axis_angle({1, 0, 0}, roll);
  Rotation r = rz.compose(ry).compose(rx);
  r.provenance = RotationProvenance::zyx_euler;
  return r;
}

namespace {

std::int32_t nearest_vertex(const Vec3& target, const IcosphereMesh& mesh) {
  double best = -2.0;
  for (const Vec3& v : mesh.vertices) best = std::max(best, dot(target, v));
  // Lowest index within the tie tolerance of the max wins.
  for (std::size_t j = 0; j < mesh.vertex_count(); ++j)
    if (dot(target, mesh.vertices[j]) >= best - kNearestTieTol)
      return static_cast<std::int32_t>(j);
  throw DataError("nearest_vertex: empty mesh");
}

}  // namespace

std::vector<std::int32_t> nearest_index_map(const Rotation& r,
                                            const IcosphereMesh& mesh) {
  const Rotation rinv = r.inverse();
  std::vector<std::int32_t> out(mesh.vertex_count());
  for (std::size_t t = 0; t < mesh.vertex_count(); ++t)
    out[t] = nearest_vertex(rinv.apply(mesh.vertices[t]), mesh);
  return out;
}

std::vector<std::int32_t> mirror_index_map(const IcosphereMesh& mesh) {
  std::vector<std::int32_t> out(mesh.vertex_count());
  for (std::size_t t = 0; t < mesh.vertex_count(); ++t) {
    const Vec3& p = mesh.vertices[t];
    out[t] = nearest_vertex({p[0], -p[1], p[2]}, mesh);
  }
  return out;
}

std::vector<Rotation> icosahedral_rotation_group() {
  const IcosphereMesh base = build_icosphere(0);
  std::vector<Rotation> group;
  Rotation id = Rotation::identity();
  id.provenance = RotationProvenance::icosahedral_group;
  group.push_back(id);

  auto add_rot = [&](const Vec3& axis, double angle) {
    Rotation r = Rotation::from_axis_angle(axis, angle);
    r.provenance = RotationProvenance::icosahedral_group;
    group.push_back(r);
  };

  // Vertex axes: 6 antipodal pairs, order-5 rotations.
  for (std::size_t i = 0; i < base.vertex_count(); ++i) {
    const Vec3& p = base.vertices[i];
    bool is_pair_lead = true;
    for (std::size_t j = 0; j < i; ++j)
      if (dot(p, base.vertices[j]) < -1.0 + 1e-9) is_pair_lead = false;
    if (!is_pair_lead) continue;
    for (int k = 1; k <= 4; ++k) add_rot(p, 2.0 * kPi * k / 5.0);
  }

  // Face axes: 10 antipodal pairs of face centers, order-3 rotations.
  std::vector<Vec3> face_axes;
  for (const auto& f : base.faces) {
    const Vec3 c = normalized(
        add(add(base.vertices[f[0]], base.vertices[f[1]]), base.vertices[f[2]]));
    bool seen = false;
    for (const Vec3& a : face_axes)
      if (std::abs(dot(a, c)) > 1.0 - 1e-9) seen = true;
    if (!seen) face_axes.push_back(c);
  }
  for (const Vec3& a : face_axes)
    for (int k = 1; k <= 2; ++k) add_rot(a, 2.0 * kPi * k / 3.0);

  // Edge axes: 15 antipodal pairs of edge midpoints, order-2 rotations.
  std::vector<Vec3> edge_axes;
  for (std::size_t i = 0; i < base.vertex_count(); ++i) {
    for (std::int32_t j : base.neighbors[i]) {
      if (static_cast<std::size_t>(j) <= i) continue;
      const Vec3 m = normalized(add(base.vertices[i], base.vertices[j]));
      bool seen = false;
      for (const Vec3& a : edge_axes)
        if (std::abs(dot(a, m)) > 1.0 - 1e-9) seen = true;
      if (!seen) edge_axes.push_back(m);
    }
  }
  for (const Vec3& a : edge_axes) add_rot(a, kPi);

  if (group.size() != 60)
    throw DataError("icosahedral group construction produced " +
                    std::to_string(group.size()) + " elements, expected 60");
  return group;
}

RotationMapSet build_rotation_maps(const Rotation& r,
                                   const IcosphereMesh& token_mesh,
                                   const IcosphereMesh& output_mesh) {
  RotationMapSet maps;
  maps.rotation = r;
  maps.idx_proj = nearest_index_map(r, token_mesh);
  maps.idx_img = nearest_index_map(r, output_mesh);
  return maps;
}

void write_rotation_maps(const std::string& path, const RotationMapSet& maps) {
  Container c;
  c.kind = "rotmap";
  c.meta["provenance"] =
      std::to_string(static_cast<std::int32_t>(maps.rotation.provenance));
  c.add_f64("quaternion", {4}, maps.rotation.q.data());
  c.add_i32("idx_proj", {maps.idx_proj.size()}, maps.idx_proj.data());
  c.add_i32("idx_img", {maps.idx_img.size()}, maps.idx_img.data());
  write_container(path, c);
}

RotationMapSet read_rotation_maps(const std::string& path) {
  const Container c = read_container(path, "rotmap");
  RotationMapSet maps;
  const auto q = c.get_f64("quaternion");
  if (q.size() != 4) throw DataError("rotation maps: bad quaternion");
  std::copy(q.begin(), q.end(), maps.rotation.q.begin());
  maps.rotation.provenance =
      static_cast<RotationProvenance>(c.meta_i64("provenance"));
  maps.idx_proj = c.get_i32("idx_proj");
  maps.idx_img = c.get_i32("idx_img");
  return maps;
}

}  // namespace icoseg
