#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "icoseg/geometry.hpp"
#include "icoseg/so3.hpp"
#include "test_util.hpp"

using namespace icoseg;

namespace {

bool is_permutation_map(const std::vector<std::int32_t>& m) {
  std::vector<bool> seen(m.size(), false);
  for (std::int32_t v : m) {
    if (v < 0 || static_cast<std::size_t>(v) >= m.size()) return false;
    if (seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = true;
  }
  return true;
}

}  // namespace

TEST_CASE("quaternion application agrees with the rotation matrix") {
  RngState rng(401);
  for (int n = 0; n < 20; ++n) {
    const Rotation r = sample_rotation_uniform(rng);
    const auto m = r.matrix();
    const Vec3 v = rng.unit_vector();
    const Vec3 a = r.apply(v);
    const Vec3 b{m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
                 m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
                 m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
    for (int d = 0; d < 3; ++d) CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-12));
    // Rotations preserve length.
    CHECK(norm(a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("axis-angle rotations do what they say") {
  const Rotation r = Rotation::from_axis_angle(Vec3{0, 0, 1}, kPi / 2);
  const Vec3 v = r.apply(Vec3{1, 0, 0});
  CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(v[2] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r.angle() == doctest::Approx(kPi / 2).epsilon(1e-12));
}

TEST_CASE("compose and inverse behave like the group operations") {
  RngState rng(403);
  for (int n = 0; n < 10; ++n) {
    const Rotation a = sample_rotation_uniform(rng);
    const Rotation b = sample_rotation_uniform(rng);
    const Vec3 v = rng.unit_vector();
    const Vec3 lhs = a.compose(b).apply(v);
    const Vec3 rhs = a.apply(b.apply(v));
    for (int d = 0; d < 3; ++d)
      CHECK(lhs[d] == doctest::Approx(rhs[d]).epsilon(1e-12));
    const Vec3 back = a.inverse().apply(a.apply(v));
    for (int d = 0; d < 3; ++d)
      CHECK(back[d] == doctest::Approx(v[d]).epsilon(1e-12));
  }
}

TEST_CASE("samplers are deterministic under a fixed seed and respect caps") {
  RngState r1(7), r2(7);
  for (int n = 0; n < 5; ++n) {
    const Rotation a = sample_rotation_zyx(2 * kPi, kPi, 2 * kPi, r1);
    const Rotation b = sample_rotation_zyx(2 * kPi, kPi, 2 * kPi, r2);
    CHECK(a.q == b.q);
    CHECK(a.provenance == RotationProvenance::zyx_euler);
  }
  RngState r3(11);
  for (int n = 0; n < 50; ++n) {
    const Rotation r = sample_rotation_capped(0.3, r3);
    CHECK(r.angle() <= 0.3 + 1e-12);
    CHECK(r.provenance == RotationProvenance::axis_angle_capped);
  }
  RngState r4(13);
  const Rotation u = sample_rotation_uniform(r4);
  CHECK(u.provenance == RotationProvenance::uniform_quaternion);
  const double qn = std::sqrt(u.q[0] * u.q[0] + u.q[1] * u.q[1] +
                              u.q[2] * u.q[2] + u.q[3] * u.q[3]);
  CHECK(qn == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the icosahedral group has sixty distinct elements") {
  const std::vector<Rotation> group = icosahedral_rotation_group();
  REQUIRE(group.size() == 60);
  CHECK(group[0].angle() == doctest::Approx(0.0).epsilon(1e-12));
  for (const Rotation& g : group)
    CHECK(g.provenance == RotationProvenance::icosahedral_group);

  // Distinctness: as permutation maps on the rank-1 mesh.
  const IcosphereMesh mesh = build_icosphere(1);
  std::set<std::vector<std::int32_t>> maps;
  for (const Rotation& g : group) maps.insert(nearest_index_map(g, mesh));
  CHECK(maps.size() == 60);
}

TEST_CASE("group rotations act as exact permutations that invert cleanly") {
  const IcosphereMesh mesh = build_icosphere(2);
  const std::vector<Rotation> group = icosahedral_rotation_group();
  for (std::size_t gi : {0UL, 3UL, 25UL, 44UL, 59UL}) {
    const Rotation& g = group[gi];
    const auto fwd = nearest_index_map(g, mesh);
    const auto inv = nearest_index_map(g.inverse(), mesh);
    REQUIRE(is_permutation_map(fwd));
    REQUIRE(is_permutation_map(inv));
    for (std::size_t t = 0; t < fwd.size(); ++t) {
      CHECK(fwd[static_cast<std::size_t>(inv[t])] == static_cast<std::int32_t>(t));
      CHECK(inv[static_cast<std::size_t>(fwd[t])] == static_cast<std::int32_t>(t));
    }
    // The map really is the pull-back: p_{fwd[t]} == g^-1 p_t.
    for (std::size_t t = 0; t < fwd.size(); t += 97) {
      const Vec3 expect = g.inverse().apply(mesh.vertices[t]);
      const Vec3& got = mesh.vertices[static_cast<std::size_t>(fwd[t])];
      CHECK(geodesic_distance(expect, got) < 1e-9);
    }
  }
}

TEST_CASE("mirror map flips the sphere left-right as a permutation") {
  const IcosphereMesh mesh = build_icosphere(2);
  const auto m = mirror_index_map(mesh);
  REQUIRE(is_permutation_map(m));
  for (std::size_t t = 0; t < m.size(); ++t) {
    const Vec3& src = mesh.vertices[static_cast<std::size_t>(m[t])];
    CHECK(src[0] == doctest::Approx(mesh.vertices[t][0]).epsilon(1e-12));
    CHECK(src[1] == doctest::Approx(-mesh.vertices[t][1]).epsilon(1e-12));
    CHECK(src[2] == doctest::Approx(mesh.vertices[t][2]).epsilon(1e-12));
  }
}

TEST_CASE("rotation map sets pair the two ranks and roundtrip through disk") {
  namespace fs = std::filesystem;
  const IcosphereMesh token = build_icosphere(1);
  const IcosphereMesh output = build_icosphere(2);
  RngState rng(407);
  const Rotation r = sample_rotation_uniform(rng);
  const RotationMapSet maps = build_rotation_maps(r, token, output);
  CHECK(maps.idx_proj.size() == token.vertex_count());
  CHECK(maps.idx_img.size() == output.vertex_count());

  const fs::path path = fs::temp_directory_path() / "icoseg_test_rotmap.bin";
  write_rotation_maps(path.string(), maps);
  const RotationMapSet back = read_rotation_maps(path.string());
  CHECK(back.rotation.q == maps.rotation.q);
  CHECK(back.rotation.provenance == maps.rotation.provenance);
  CHECK(back.idx_proj == maps.idx_proj);
  CHECK(back.idx_img == maps.idx_img);
  fs::remove(path);
  fs::remove(path.string() + ".json");
}
