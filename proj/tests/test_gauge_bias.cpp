#include <cmath>
#include <vector>

#include "doctest.h"
#include "icoseg/gauge_bias.hpp"
#include "test_util.hpp"

using namespace icoseg;
using testutil::make_cache;
using testutil::make_table;

namespace {

// Two nodes, width 3: a degenerate self slot, two ring slots for node 0,
// one ring slot plus padding for node 1.
struct Fixture {
  NeighborTable table;
  std::vector<double> delta_hat;
  std::vector<double> alpha;  // slot-major [node][slot][anchor], F = 2
  std::vector<std::uint8_t> degenerate;
  int anchors = 2;
  int bins = 16;

  explicit Fixture(RngState& rng) {
    table = make_table(2, 3, {0, 1, 2, 1, 0, -1});
    delta_hat = {0.0, 0.31, 0.57, 0.0, 0.44, 0.0};
    degenerate = {1, 0, 0, 1, 0, 0};
    alpha.resize(delta_hat.size() * 2, 0.0);
    for (std::size_t s = 0; s < delta_hat.size(); ++s)
      if (!degenerate[s])
        for (int f = 0; f < 2; ++f)
          alpha[s * 2 + f] = rng.uniform(-kPi, kPi);
  }

  GeodesicCache cache() const {
    return make_cache(table, anchors, bins, delta_hat, alpha, degenerate);
  }
};

FourierBiasTable random_table(int heads, int order, int bins, RngState& rng) {
  FourierBiasTable t = FourierBiasTable::zeros(heads, order, bins);
  testutil::fill_uniform(t.A, rng, -0.8, 0.8);
  testutil::fill_uniform(t.Bc, rng, -0.8, 0.8);
  return t;
}

}  // namespace

TEST_CASE("frame pooling kills every mode except 0 mod 6") {
  RngState rng(7);
  Fixture fx(rng);
  const GeodesicCache cache = fx.cache();
  const BiasWorkspace ws = build_bias_workspace(cache, 7);
  for (std::size_t i = 0; i < cache.nodes; ++i) {
    for (int k = 0; k < cache.width; ++k) {
      const std::size_t s = cache.slot(i, k);
      if (!cache.valid[s] || cache.degenerate[s]) continue;
      CHECK(ws.cos_sum[ws.idx(i, k, 0)] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(ws.sin_sum[ws.idx(i, k, 0)]) < 1e-12);
      for (int m = 1; m <= 5; ++m) {
        CHECK(std::abs(ws.cos_sum[ws.idx(i, k, m)]) < 1e-9);
        CHECK(std::abs(ws.sin_sum[ws.idx(i, k, m)]) < 1e-9);
      }
      // Mode 6 survives as the anchor average of the 6x angle.
      double c6 = 0.0, s6 = 0.0;
      for (int f = 0; f < cache.anchors; ++f) {
        c6 += std::cos(6.0 * fx.alpha[s * 2 + f]) / cache.anchors;
        s6 += std::sin(6.0 * fx.alpha[s * 2 + f]) / cache.anchors;
      }
      CHECK(ws.cos_sum[ws.idx(i, k, 6)] == doctest::Approx(c6).epsilon(1e-9));
      CHECK(ws.sin_sum[ws.idx(i, k, 6)] == doctest::Approx(s6).epsilon(1e-9));
      // Mode 7 behaves like mode 1 and cancels too.
      CHECK(std::abs(ws.cos_sum[ws.idx(i, k, 7)]) < 1e-9);
      CHECK(std::abs(ws.sin_sum[ws.idx(i, k, 7)]) < 1e-9);
    }
  }
}

TEST_CASE("low-order tables are immune to frame rotation") {
  RngState rng(11);
  Fixture fx(rng);
  const GeodesicCache base = fx.cache();
  const FourierBiasTable table = random_table(2, 5, fx.bins, rng);
  const std::vector<double> ref =
      eval_bias(table, base, build_bias_workspace(base, 5));

  // Rotate each anchor frame by its own arbitrary angle.
  Fixture turned = fx;
  for (std::size_t i = 0; i < 2; ++i) {
    const double theta[2] = {rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi)};
    for (int k = 0; k < 3; ++k) {
      const std::size_t s = i * 3 + k;
      if (turned.degenerate[s]) continue;
      for (int f = 0; f < 2; ++f) turned.alpha[s * 2 + f] += theta[f];
    }
  }
  const GeodesicCache moved = turned.cache();
  const std::vector<double> got =
      eval_bias(table, moved, build_bias_workspace(moved, 5));
  REQUIRE(got.size() == ref.size());
  for (std::size_t s = 0; s < ref.size(); ++s)
    CHECK(std::abs(got[s] - ref[s]) < 1e-9);
}

TEST_CASE("shifting every angle by sixty degrees changes nothing at any order") {
  RngState rng(13);
  Fixture fx(rng);
  const GeodesicCache base = fx.cache();
  const FourierBiasTable table = random_table(3, 9, fx.bins, rng);
  const std::vector<double> ref =
      eval_bias(table, base, build_bias_workspace(base, 9));

  Fixture shifted = fx;
  for (double& a : shifted.alpha) a += 2.0 * kPi / 6.0;
  const GeodesicCache moved = shifted.cache();
  const std::vector<double> got =
      eval_bias(table, moved, build_bias_workspace(moved, 9));
  for (std::size_t s = 0; s < ref.size(); ++s)
    CHECK(std::abs(got[s] - ref[s]) < 1e-9);
}

TEST_CASE("a pure sixth-harmonic table reproduces the brute-force sum") {
  RngState rng(17);
  Fixture fx(rng);
  const GeodesicCache cache = fx.cache();
  FourierBiasTable table = FourierBiasTable::zeros(2, 6, fx.bins);
  for (int h = 0; h < 2; ++h)
    for (int b = 0; b < fx.bins; ++b) {
      table.A[table.idx(h, 6, b)] = rng.uniform(-1.0, 1.0);
      table.Bc[table.idx(h, 6, b)] = rng.uniform(-1.0, 1.0);
    }
  const BiasWorkspace ws = build_bias_workspace(cache, 6);
  const std::vector<double> got = eval_bias(table, cache, ws);

  for (std::size_t i = 0; i < cache.nodes; ++i) {
    for (int k = 0; k < cache.width; ++k) {
      const std::size_t s = cache.slot(i, k);
      if (!cache.valid[s] || cache.degenerate[s]) continue;
      for (int h = 0; h < 2; ++h) {
        const double eta = cache.bin_frac[s];
        const double a6 =
            (1 - eta) * table.A[table.idx(h, 6, cache.bin_lo[s])] +
            eta * table.A[table.idx(h, 6, cache.bin_hi[s])];
        const double b6 =
            (1 - eta) * table.Bc[table.idx(h, 6, cache.bin_lo[s])] +
            eta * table.Bc[table.idx(h, 6, cache.bin_hi[s])];
        // Brute force: average the shifted cosines over anchors and the six
        // frame rotations directly.
        double acc = 0.0;
        for (int f = 0; f < 2; ++f)
          for (int r = 0; r < 6; ++r) {
            const double ang = 6.0 * (fx.alpha[s * 2 + f] - 2.0 * kPi * r / 6.0);
            acc += (a6 * std::cos(ang) + b6 * std::sin(ang)) / 12.0;
          }
        CHECK(std::abs(got[s * 2 + h] - acc) < 1e-9);
      }
    }
  }
}

TEST_CASE("degenerate slots reduce to the radial profile at mode zero") {
  RngState rng(19);
  Fixture fx(rng);
  const GeodesicCache cache = fx.cache();
  const FourierBiasTable table = random_table(2, 6, fx.bins, rng);
  const BiasWorkspace ws = build_bias_workspace(cache, 6);
  const std::vector<double> got = eval_bias(table, cache, ws);
  for (std::size_t i = 0; i < cache.nodes; ++i) {
    const std::size_t s = cache.slot(i, 0);  // self slot
    REQUIRE(cache.degenerate[s]);
    for (int h = 0; h < 2; ++h) {
      const double expected = table.A[table.idx(h, 0, cache.bin_lo[s])];
      CHECK(got[s * 2 + h] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("padded slots produce exactly zero bias") {
  RngState rng(23);
  Fixture fx(rng);
  const GeodesicCache cache = fx.cache();
  const FourierBiasTable table = random_table(2, 6, fx.bins, rng);
  const std::vector<double> got =
      eval_bias(table, cache, build_bias_workspace(cache, 6));
  const std::size_t pad = cache.slot(1, 2);
  REQUIRE(!cache.valid[pad]);
  CHECK(got[pad * 2 + 0] == 0.0);
  CHECK(got[pad * 2 + 1] == 0.0);
}

TEST_CASE("table gradients match central finite differences") {
  RngState rng(29);
  Fixture fx(rng);
  const GeodesicCache cache = fx.cache();
  const BiasWorkspace ws = build_bias_workspace(cache, 6);
  FourierBiasTable table = random_table(2, 6, fx.bins, rng);

  std::vector<double> upstream(cache.delta_hat.size() * 2);
  testutil::fill_uniform(upstream, rng, -1.0, 1.0);
  // Padded slots never receive gradient from attention.
  const std::size_t pad = cache.slot(1, 2);
  upstream[pad * 2 + 0] = 0.0;
  upstream[pad * 2 + 1] = 0.0;

  std::vector<double> grad_A(table.A.size(), 0.0), grad_Bc(table.Bc.size(), 0.0);
  bias_backward(table, cache, ws, upstream, grad_A, grad_Bc);

  const auto loss = [&]() {
    const std::vector<double> b = eval_bias(table, cache, ws);
    double j = 0.0;
    for (std::size_t s = 0; s < b.size(); ++s) j += upstream[s] * b[s];
    return j;
  };
  const std::vector<double> fd_A = testutil::fd_gradient(table.A, loss);
  const std::vector<double> fd_Bc = testutil::fd_gradient(table.Bc, loss);
  CHECK(testutil::rel_err(grad_A, fd_A) < 1e-7);
  CHECK(testutil::rel_err(grad_Bc, fd_Bc) < 1e-7);
}

TEST_CASE("shape mismatches are rejected") {
  RngState rng(31);
  Fixture fx(rng);
  const GeodesicCache cache = fx.cache();
  const BiasWorkspace ws = build_bias_workspace(cache, 6);
  const FourierBiasTable wrong_bins = FourierBiasTable::zeros(2, 6, 8);
  CHECK_THROWS_AS(eval_bias(wrong_bins, cache, ws), ConfigError);
  const FourierBiasTable wrong_order = FourierBiasTable::zeros(2, 4, fx.bins);
  CHECK_THROWS_AS(eval_bias(wrong_order, cache, ws), ConfigError);
}
