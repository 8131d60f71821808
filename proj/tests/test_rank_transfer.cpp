#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "icoseg/rank_transfer.hpp"
#include "icoseg/so3.hpp"
#include "test_util.hpp"

using namespace icoseg;

TEST_CASE("parents partition the fine mesh and ties are split evenly") {
  const IcosphereMesh fine = build_icosphere(2);
  const IcosphereMesh coarse = build_icosphere(1);
  const RankTransfer t = build_rank_transfer(fine, coarse);
  REQUIRE(t.fine_nodes == fine.vertex_count());
  REQUIRE(t.coarse_nodes == coarse.vertex_count());

  // Every coarse vertex is its own best parent: fine prefix nodes coincide
  // with coarse nodes exactly.
  for (std::size_t i = 0; i < coarse.vertex_count(); ++i) {
    CHECK(t.parent[i] == static_cast<std::int32_t>(i));
    CHECK(t.tie_offset[i + 1] - t.tie_offset[i] == 1);
  }

  std::size_t total_children = 0;
  for (std::size_t c = 0; c < t.coarse_nodes; ++c) {
    CHECK(t.hard_count[c] >= 1);
    total_children += static_cast<std::size_t>(t.hard_count[c]);
  }
  CHECK(total_children == t.fine_nodes);

  // Tie weights are uniform over each tied set and sum to one.
  bool saw_tie = false;
  for (std::size_t i = 0; i < t.fine_nodes; ++i) {
    const int n = t.tie_offset[i + 1] - t.tie_offset[i];
    REQUIRE(n >= 1);
    if (n > 1) saw_tie = true;
    double sum = 0.0;
    for (std::int32_t a = t.tie_offset[i]; a < t.tie_offset[i + 1]; ++a) {
      CHECK(t.tie_weight[a] == doctest::Approx(1.0 / n).epsilon(1e-15));
      sum += t.tie_weight[a];
      CHECK(t.parent[i] <= t.tie_index[a]);  // parent is the lowest tied id
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Midpoint vertices are equidistant between two coarse endpoints, so ties
  // must actually occur.
  CHECK(saw_tie);
}

TEST_CASE("upsample kernel rows are normalized and reach the tied parents") {
  const IcosphereMesh fine = build_icosphere(2);
  const IcosphereMesh coarse = build_icosphere(1);
  const RankTransfer t = build_rank_transfer(fine, coarse);
  CHECK(t.sigma > 0.0);
  for (std::size_t i = 0; i < t.fine_nodes; ++i) {
    double sum = 0.0;
    bool has_parent = false;
    for (std::int32_t a = t.up_offset[i]; a < t.up_offset[i + 1]; ++a) {
      CHECK(t.up_weight[a] > 0.0);
      sum += t.up_weight[a];
      if (t.up_index[a] == t.parent[i]) has_parent = true;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(has_parent);
  }
}

TEST_CASE("constant fields are preserved in both directions") {
  const IcosphereMesh fine = build_icosphere(2);
  const IcosphereMesh coarse = build_icosphere(1);
  const RankTransfer t = build_rank_transfer(fine, coarse);
  Matrix cf(fine.vertex_count(), 2);
  for (std::size_t i = 0; i < cf.rows; ++i) {
    cf.at(i, 0) = 3.5;
    cf.at(i, 1) = -1.25;
  }
  for (bool geo : {true, false}) {
    const Matrix down = downsample(t, cf, fine.area_weights, geo);
    REQUIRE(down.rows == coarse.vertex_count());
    for (std::size_t c = 0; c < down.rows; ++c) {
      CHECK(down.at(c, 0) == doctest::Approx(3.5).epsilon(1e-12));
      CHECK(down.at(c, 1) == doctest::Approx(-1.25).epsilon(1e-12));
    }
    Matrix cc(coarse.vertex_count(), 2);
    for (std::size_t c = 0; c < cc.rows; ++c) {
      cc.at(c, 0) = 0.75;
      cc.at(c, 1) = 2.0;
    }
    const Matrix up = upsample(t, cc, geo);
    REQUIRE(up.rows == fine.vertex_count());
    for (std::size_t i = 0; i < up.rows; ++i) {
      CHECK(up.at(i, 0) == doctest::Approx(0.75).epsilon(1e-12));
      CHECK(up.at(i, 1) == doctest::Approx(2.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("resampling commutes with exact rotations") {
  const IcosphereMesh fine = build_icosphere(2);
  const IcosphereMesh coarse = build_icosphere(1);
  const RankTransfer t = build_rank_transfer(fine, coarse);
  const std::vector<Rotation> group = icosahedral_rotation_group();
  RngState rng(301);
  Matrix x(fine.vertex_count(), 3);
  testutil::fill_uniform(x, rng, -1.0, 1.0);

  // A handful of nontrivial group elements keeps the loop fast.
  for (std::size_t gi : {1UL, 17UL, 33UL, 59UL}) {
    const Rotation& g = group[gi];
    const auto map_f = nearest_index_map(g, fine);
    const auto map_c = nearest_index_map(g, coarse);

    // down(rotate(x)) == rotate(down(x))
    Matrix xr(fine.vertex_count(), 3);
    for (std::size_t i = 0; i < xr.rows; ++i)
      for (int d = 0; d < 3; ++d) xr.at(i, d) = x.at(map_f[i], d);
    const Matrix a = downsample(t, xr, fine.area_weights, true);
    const Matrix down = downsample(t, x, fine.area_weights, true);
    for (std::size_t c = 0; c < a.rows; ++c)
      for (int d = 0; d < 3; ++d)
        CHECK(a.at(c, d) == doctest::Approx(down.at(map_c[c], d)).epsilon(1e-9));

    // up(rotate(y)) == rotate(up(y))
    Matrix y(coarse.vertex_count(), 3);
    testutil::fill_uniform(y, rng, -1.0, 1.0);
    Matrix yr(coarse.vertex_count(), 3);
    for (std::size_t c = 0; c < yr.rows; ++c)
      for (int d = 0; d < 3; ++d) yr.at(c, d) = y.at(map_c[c], d);
    const Matrix b = upsample(t, yr, true);
    const Matrix up = upsample(t, y, true);
    for (std::size_t i = 0; i < b.rows; ++i)
      for (int d = 0; d < 3; ++d)
        CHECK(b.at(i, d) == doctest::Approx(up.at(map_f[i], d)).epsilon(1e-9));
  }
}

TEST_CASE("hard mode copies the lowest tied parent") {
  const IcosphereMesh fine = build_icosphere(1);
  const IcosphereMesh coarse = build_icosphere(0);
  const RankTransfer t = build_rank_transfer(fine, coarse);
  RngState rng(303);
  Matrix y(coarse.vertex_count(), 1);
  testutil::fill_uniform(y, rng, -1.0, 1.0);
  const Matrix up = upsample(t, y, false);
  for (std::size_t i = 0; i < t.fine_nodes; ++i)
    CHECK(up.at(i, 0) == y.at(t.parent[i], 0));
}

TEST_CASE("transfer gradients match FD in both modes and directions") {
  const IcosphereMesh fine = build_icosphere(1);
  const IcosphereMesh coarse = build_icosphere(0);
  const RankTransfer t = build_rank_transfer(fine, coarse);
  RngState rng(305);

  for (bool geo : {true, false}) {
    CAPTURE(geo);
    Matrix x(fine.vertex_count(), 2);
    testutil::fill_uniform(x, rng, -1.0, 1.0);
    Matrix rd(coarse.vertex_count(), 2);
    testutil::fill_uniform(rd, rng, -1.0, 1.0);
    const auto dloss = [&]() {
      return testutil::probe(downsample(t, x, fine.area_weights, geo), rd);
    };
    const Matrix gdown = downsample_backward(t, rd, fine.area_weights, geo);
    CHECK(testutil::rel_err(gdown.a, testutil::fd_gradient(x.a, dloss)) < 1e-7);

    Matrix y(coarse.vertex_count(), 2);
    testutil::fill_uniform(y, rng, -1.0, 1.0);
    Matrix ru(fine.vertex_count(), 2);
    testutil::fill_uniform(ru, rng, -1.0, 1.0);
    const auto uloss = [&]() { return testutil::probe(upsample(t, y, geo), ru); };
    const Matrix gup = upsample_backward(t, ru, geo);
    CHECK(testutil::rel_err(gup.a, testutil::fd_gradient(y.a, uloss)) < 1e-7);
  }
}

TEST_CASE("transfer roundtrips through disk") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "icoseg_test_transfer.bin";
  const RankTransfer t =
      build_rank_transfer(build_icosphere(2), build_icosphere(1));
  write_rank_transfer(path.string(), t);
  const RankTransfer back = read_rank_transfer(path.string());
  CHECK(back.fine_rank == t.fine_rank);
  CHECK(back.coarse_rank == t.coarse_rank);
  CHECK(back.sigma == t.sigma);
  CHECK(back.parent == t.parent);
  CHECK(back.tie_offset == t.tie_offset);
  CHECK(back.tie_index == t.tie_index);
  CHECK(back.tie_weight == t.tie_weight);
  CHECK(back.up_offset == t.up_offset);
  CHECK(back.up_index == t.up_index);
  CHECK(back.up_weight == t.up_weight);
  CHECK(back.hard_count == t.hard_count);
  fs::remove(path);
  fs::remove(path.string() + ".json");
}

TEST_CASE("same-rank and inverted transfers are rejected") {
  const IcosphereMesh a = build_icosphere(1);
  const IcosphereMesh b = build_icosphere(1);
  CHECK_THROWS_AS(build_rank_transfer(a, b), ConfigError);
  CHECK_THROWS_AS(build_rank_transfer(build_icosphere(0), build_icosphere(1)),
                  ConfigError);
}
