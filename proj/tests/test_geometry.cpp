#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "icoseg/geometry.hpp"
#include "test_util.hpp"

using namespace icoseg;

TEST_CASE("geodesic distance matches known arcs") {
  const Vec3 x{1, 0, 0}, y{0, 1, 0}, z{0, 0, 1};
  CHECK(geodesic_distance(x, x) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(geodesic_distance(x, y) == doctest::Approx(kPi / 2).epsilon(1e-15));
  CHECK(geodesic_distance(x, scale(x, -1.0)) ==
        doctest::Approx(kPi).epsilon(1e-15));
  CHECK(geodesic_distance(z, normalized(Vec3{1, 0, 1})) ==
        doctest::Approx(kPi / 4).epsilon(1e-12));
  CHECK_THROWS_AS(geodesic_distance(Vec3{2, 0, 0}, y), DataError);
}

TEST_CASE("tangent projection removes the radial part") {
  const Vec3 p{0, 0, 1};
  const Vec3 q = normalized(Vec3{1, 2, 3});
  const TangentProjection t = tangent_project(p, q);
  REQUIRE(!t.degenerate);
  CHECK(std::abs(dot(t.direction, p)) < 1e-15);
  CHECK(norm(t.direction) == doctest::Approx(1.0).epsilon(1e-14));
  // Parallel and antiparallel inputs have no tangent component.
  CHECK(tangent_project(p, p).degenerate);
  CHECK(tangent_project(p, scale(p, -1.0)).degenerate);
}

TEST_CASE("relative angle at the pole equals the longitude difference") {
  const Vec3 pole{0, 0, 1};
  const Vec3 anchor{std::sin(0.4), 0, std::cos(0.4)};  // longitude 0
  for (double lon : {0.5, 2.0, -1.3, 3.0}) {
    const Vec3 q{std::sin(0.7) * std::cos(lon), std::sin(0.7) * std::sin(lon),
                 std::cos(0.7)};
    const RelativeAngle ra = relative_angle(pole, q, anchor);
    REQUIRE(!ra.degenerate);
    CHECK(ra.alpha == doctest::Approx(lon).epsilon(1e-12));
  }
  CHECK(relative_angle(pole, pole, anchor).degenerate);
}

TEST_CASE("radial bins interpolate linearly over the arc range") {
  SUBCASE("frozen cases at 16 bins") {
    const RadialBin mid = radial_bins(0.5, 16);
    CHECK(mid.lo == 7);
    CHECK(mid.hi == 8);
    CHECK(mid.frac == doctest::Approx(0.5).epsilon(1e-15));
    const RadialBin zero = radial_bins(0.0, 16);
    CHECK(zero.lo == 0);
    CHECK(zero.hi == 1);
    CHECK(zero.frac == 0.0);
    const RadialBin one = radial_bins(1.0, 16);
    CHECK(one.lo == 15);
    CHECK(one.hi == 15);
    CHECK(one.frac == 0.0);
  }
  SUBCASE("bad arguments are rejected") {
    CHECK_THROWS_AS(radial_bins(0.5, 1), ConfigError);
    CHECK_THROWS_AS(radial_bins(-0.1, 16), DataError);
    CHECK_THROWS_AS(radial_bins(1.1, 16), DataError);
  }
}

TEST_CASE("anchor selection ranks by projection magnitude") {
  const IcosphereMesh mesh = build_icosphere(2);
  const NeighborTable table = build_neighbor_table(mesh);
  const auto anchors = select_anchors(mesh, table, 3);
  REQUIRE(anchors.size() == mesh.vertex_count() * 3);
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    for (int f = 0; f < 3; ++f) {
      const std::int32_t a = anchors[i * 3 + f];
      REQUIRE(a >= 0);
      // Anchors must be ring members, not the node itself.
      CHECK(a != static_cast<std::int32_t>(i));
      bool in_ring = false;
      for (int k = 1; k < table.width; ++k)
        if (table.is_valid(i, k) && table.at(i, k) == a) in_ring = true;
      CHECK(in_ring);
    }
  }
}

TEST_CASE("anchor closure weights always sum to the anchor count") {
  const IcosphereMesh mesh = build_icosphere(2);
  const NeighborTable table = build_neighbor_table(mesh);
  const AnchorClosure cl = select_anchor_closure(mesh, table, 3);
  REQUIRE(cl.offset.size() == mesh.vertex_count() + 1);
  bool saw_tie_split = false;
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    double sum = 0.0;
    for (std::int32_t a = cl.offset[i]; a < cl.offset[i + 1]; ++a) {
      CHECK(cl.weight[a] > 0.0);
      if (cl.weight[a] < 1.0) saw_tie_split = true;
      sum += cl.weight[a];
    }
    CHECK(sum == doctest::Approx(3.0).epsilon(1e-12));
    // Closure contains at least the plain top-F picks.
    CHECK(cl.offset[i + 1] - cl.offset[i] >= 3);
  }
  // The twelve degree-five corners have fully tied rings, so splitting must
  // actually occur somewhere.
  CHECK(saw_tie_split);
}

TEST_CASE("degree-five corners treat their whole ring as tied anchors") {
  const IcosphereMesh mesh = build_icosphere(1);
  const NeighborTable table = build_neighbor_table(mesh);
  const AnchorClosure cl = select_anchor_closure(mesh, table, 3);
  for (std::size_t i = 0; i < 12; ++i) {
    const int span = cl.offset[i + 1] - cl.offset[i];
    CHECK(span == 5);
    for (std::int32_t a = cl.offset[i]; a < cl.offset[i + 1]; ++a)
      CHECK(cl.weight[a] == doctest::Approx(3.0 / 5.0).epsilon(1e-12));
  }
}

TEST_CASE("geometry cache marks the self slot degenerate and bins the rest") {
  const IcosphereMesh mesh = build_icosphere(2);
  const NeighborTable table = build_neighbor_table(mesh);
  const GeodesicCache cache = build_geodesic_cache(mesh, table, 3, 16);
  for (std::size_t i = 0; i < cache.nodes; ++i) {
    const std::size_t self = cache.slot(i, 0);
    CHECK(cache.degenerate[self] == 1);
    CHECK(cache.delta[self] == 0.0);
    for (int k = 1; k < cache.width; ++k) {
      const std::size_t s = cache.slot(i, k);
      if (!cache.valid[s]) continue;
      CHECK(cache.degenerate[s] == 0);
      CHECK(cache.delta[s] > 0.0);
      CHECK(cache.delta_hat[s] == doctest::Approx(cache.delta[s] / kPi));
      CHECK(cache.bin_lo[s] >= 0);
      CHECK(cache.bin_hi[s] <= 15);
      CHECK(cache.bin_hi[s] - cache.bin_lo[s] <= 1);
    }
  }
}

TEST_CASE("cache angles are consistent between anchor views") {
  // Wherever a closure candidate coincides with a plain anchor, the stored
  // angles must agree exactly.
  const IcosphereMesh mesh = build_icosphere(2);
  const NeighborTable table = build_neighbor_table(mesh);
  const GeodesicCache cache = build_geodesic_cache(mesh, table, 3, 16);
  for (std::size_t i = 0; i < cache.nodes; ++i) {
    for (int f = 0; f < cache.anchors; ++f) {
      const std::int32_t a = cache.anchor_index[i * cache.anchors + f];
      for (std::int32_t c = cache.closure_offset[i];
           c < cache.closure_offset[i + 1]; ++c) {
        if (cache.closure_index[c] != a) continue;
        for (int k = 1; k < cache.width; ++k) {
          const std::size_t s = cache.slot(i, k);
          if (!cache.valid[s] || cache.degenerate[s]) continue;
          CHECK(cache.closure_alpha[static_cast<std::size_t>(c) * cache.width + k] ==
                cache.alpha[s * cache.anchors + f]);
        }
      }
    }
  }
}

TEST_CASE("geometry cache roundtrips through disk") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "icoseg_test_tables.bin";
  const IcosphereMesh mesh = build_icosphere(1);
  const NeighborTable table = build_neighbor_table(mesh);
  const GeodesicCache cache = build_geodesic_cache(mesh, table, 3, 16);
  write_geodesic_cache(path.string(), cache);
  const GeodesicCache back = read_geodesic_cache(path.string());
  CHECK(back.rank == cache.rank);
  CHECK(back.nodes == cache.nodes);
  CHECK(back.anchors == cache.anchors);
  CHECK(back.bins == cache.bins);
  CHECK(back.delta == cache.delta);
  CHECK(back.alpha == cache.alpha);
  CHECK(back.closure_offset == cache.closure_offset);
  CHECK(back.closure_index == cache.closure_index);
  CHECK(back.closure_weight == cache.closure_weight);
  CHECK(back.closure_alpha == cache.closure_alpha);
  CHECK(back.degenerate == cache.degenerate);
  fs::remove(path);
  fs::remove(path.string() + ".json");
}

TEST_CASE("cache construction rejects bad shape parameters") {
  const IcosphereMesh mesh = build_icosphere(1);
  const NeighborTable table = build_neighbor_table(mesh);
  CHECK_THROWS_AS(build_geodesic_cache(mesh, table, 0, 16), ConfigError);
  CHECK_THROWS_AS(build_geodesic_cache(mesh, table, 3, 1), ConfigError);
}
