#include <cmath>
#include <vector>

#include "doctest.h"
#include "icoseg/render.hpp"
#include "test_util.hpp"

using namespace icoseg;

TEST_CASE("label rendering paints each pixel with its nearest node's color") {
  const IcosphereMesh mesh = build_icosphere(1);
  std::vector<std::int32_t> labels(mesh.vertex_count(), 2);
  labels[0] = 7;  // node 0 is the north pole
  const Raster img = render_labels(mesh, labels, 16);
  REQUIRE(img.height == 16);
  REQUIRE(img.width == 32);
  REQUIRE(img.channels == 3);

  const auto& pal = class_palette();
  // The top row looks straight at the pole node.
  for (int ch = 0; ch < 3; ++ch)
    CHECK(img.at(0, 0, ch) == doctest::Approx(pal[7][ch]).epsilon(1e-12));
  // A mid-latitude pixel far from the pole gets the fill class.
  for (int ch = 0; ch < 3; ++ch)
    CHECK(img.at(8, 5, ch) == doctest::Approx(pal[2][ch]).epsilon(1e-12));
}

TEST_CASE("feature rendering clamps values into the unit interval") {
  const IcosphereMesh mesh = build_icosphere(0);
  Matrix f(mesh.vertex_count(), 3);
  for (std::size_t i = 0; i < f.rows; ++i) {
    f.at(i, 0) = -2.0;
    f.at(i, 1) = 0.25;
    f.at(i, 2) = 3.0;
  }
  const Raster img = render_features(mesh, f, 8);
  REQUIRE(img.width == 16);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      CHECK(img.at(r, c, 0) == 0.0);
      CHECK(img.at(r, c, 1) == doctest::Approx(0.25).epsilon(1e-12));
      CHECK(img.at(r, c, 2) == 1.0);
    }
}

TEST_CASE("rendering rejects mismatched inputs") {
  const IcosphereMesh mesh = build_icosphere(0);
  CHECK_THROWS_AS(render_labels(mesh, std::vector<std::int32_t>(3, 1), 8),
                  ConfigError);
  Matrix narrow(mesh.vertex_count(), 2);
  CHECK_THROWS_AS(render_features(mesh, narrow, 8), ConfigError);
  std::vector<std::int32_t> labels(mesh.vertex_count(), 1);
  CHECK_THROWS_AS(render_labels(mesh, labels, 0), ConfigError);
}
