#include <cmath>
#include <vector>

#include "doctest.h"
#include "icoseg/attention.hpp"
#include "icoseg/icosphere.hpp"
#include "test_util.hpp"

using namespace icoseg;
using testutil::make_table;

namespace {

// Plain cosine-softmax reference, written as straight loops with none of the
// stability tricks of the production path (no running max, no fused slices).
Matrix reference_attention(const Matrix& x, const AttentionParams& p,
                           const NeighborTable& table,
                           const std::vector<double>* bias,
                           const std::vector<double>& omega,
                           bool use_quadrature) {
  const std::size_t L = x.rows;
  const int H = p.heads, hd = p.head_dim, D = p.dim;
  Matrix concat(L, D);
  for (int h = 0; h < H; ++h) {
    const double tau = std::exp(std::min(p.s[h], std::log(kTauMax)));
    // Project and normalize per node.
    std::vector<std::vector<double>> q(L), k(L), v(L);
    for (std::size_t i = 0; i < L; ++i) {
      q[i].assign(hd, 0.0);
      k[i].assign(hd, 0.0);
      v[i].assign(hd, 0.0);
      for (int c = 0; c < hd; ++c)
        for (int d = 0; d < D; ++d) {
          q[i][c] += x.at(i, d) * p.head_w(p.wq, h)[d * hd + c];
          k[i][c] += x.at(i, d) * p.head_w(p.wk, h)[d * hd + c];
          v[i][c] += x.at(i, d) * p.head_w(p.wv, h)[d * hd + c];
        }
      double qn = 0.0, kn = 0.0;
      for (int c = 0; c < hd; ++c) {
        qn += q[i][c] * q[i][c];
        kn += k[i][c] * k[i][c];
      }
      qn = std::sqrt(qn) + kNormEps;
      kn = std::sqrt(kn) + kNormEps;
      for (int c = 0; c < hd; ++c) {
        q[i][c] /= qn;
        k[i][c] /= kn;
      }
    }
    for (std::size_t i = 0; i < L; ++i) {
      std::vector<double> w(table.width, 0.0);
      double z = 0.0;
      for (int kk = 0; kk < table.width; ++kk) {
        if (!table.is_valid(i, kk)) continue;
        const std::int32_t j = table.at(i, kk);
        double u = 0.0;
        for (int c = 0; c < hd; ++c) u += q[i][c] * k[j][c];
        double logit = tau * u;
        if (bias)
          logit += (*bias)[(i * table.width + kk) * H + h];
        if (use_quadrature)
          logit += std::log(std::max(omega[j], kOmegaFloor));
        w[kk] = std::exp(logit);
        z += w[kk];
      }
      for (int kk = 0; kk < table.width; ++kk) {
        if (!table.is_valid(i, kk)) continue;
        const std::int32_t j = table.at(i, kk);
        for (int c = 0; c < hd; ++c)
          concat.at(i, h * hd + c) += (w[kk] / z) * v[j][c];
      }
    }
  }
  Matrix y(L, D);
  for (std::size_t i = 0; i < L; ++i)
    for (int d = 0; d < D; ++d)
      for (int e = 0; e < D; ++e)
        y.at(i, d) += concat.at(i, e) * p.wo[e * D + d];
  return y;
}

}  // namespace

TEST_CASE("forward matches the plain reference to 1e-12") {
  const IcosphereMesh mesh = build_icosphere(1);
  const NeighborTable table = build_neighbor_table(mesh);
  RngState rng(101);
  AttentionParams p = AttentionParams::init(2, 8, rng);
  Matrix x(mesh.vertex_count(), 8);
  testutil::fill_uniform(x, rng, -1.0, 1.0);
  const std::vector<double> ones(mesh.vertex_count(), 1.0);

  SUBCASE("uniform weights and no bias") {
    AttentionCtx ctx;
    const Matrix y =
        attention_forward(x, p, table, nullptr, ones, {true}, &ctx);
    const Matrix ref = reference_attention(x, p, table, nullptr, ones, true);
    for (std::size_t i = 0; i < y.a.size(); ++i)
      CHECK(std::abs(y.a[i] - ref.a[i]) < 1e-12);
  }
  SUBCASE("random bias and true area weights") {
    std::vector<double> bias(mesh.vertex_count() * table.width * 2);
    testutil::fill_uniform(bias, rng, -1.0, 1.0);
    AttentionCtx ctx;
    const Matrix y = attention_forward(x, p, table, &bias, mesh.area_weights,
                                       {true}, &ctx);
    const Matrix ref = reference_attention(x, p, table, &bias,
                                           mesh.area_weights, true);
    for (std::size_t i = 0; i < y.a.size(); ++i)
      CHECK(std::abs(y.a[i] - ref.a[i]) < 1e-12);
  }
  SUBCASE("quadrature disabled ignores the weights") {
    AttentionCtx ctx;
    std::vector<double> big(mesh.vertex_count(), 2.0);
    std::vector<double> small(mesh.vertex_count(), 0.5);
    const Matrix y1 =
        attention_forward(x, p, table, nullptr, big, {false}, &ctx);
    const Matrix y2 =
        attention_forward(x, p, table, nullptr, small, {false}, &ctx);
    for (std::size_t i = 0; i < y1.a.size(); ++i)
      CHECK(y1.a[i] == y2.a[i]);
  }
}

TEST_CASE("area weighting splits ties by quadrature mass") {
  // Two neighbors with identical keys and area weights 2 and 1 must receive
  // attention 2/3 and 1/3 exactly.
  const NeighborTable table = make_table(3, 2, {1, 2, 1, 2, 1, 2});
  RngState rng(103);
  AttentionParams p = AttentionParams::init(2, 6, rng);
  Matrix x(3, 6);
  testutil::fill_uniform(x, rng, -1.0, 1.0);
  for (int d = 0; d < 6; ++d) x.at(2, d) = x.at(1, d);  // identical keys
  const std::vector<double> omega = {1.0, 2.0, 1.0};
  AttentionCtx ctx;
  attention_forward(x, p, table, nullptr, omega, {true}, &ctx);
  for (int h = 0; h < 2; ++h) {
    CHECK(std::abs(ctx.attn[h].at(0, 0) - 2.0 / 3.0) < 1e-12);
    CHECK(std::abs(ctx.attn[h].at(0, 1) - 1.0 / 3.0) < 1e-12);
  }
}

TEST_CASE("attention rows are stochastic and padded slots get exactly zero") {
  const IcosphereMesh mesh = build_icosphere(1);
  const NeighborTable table = build_neighbor_table(mesh);
  RngState rng(107);
  AttentionParams p = AttentionParams::init(2, 8, rng);
  Matrix x(mesh.vertex_count(), 8);
  testutil::fill_uniform(x, rng, -2.0, 2.0);
  AttentionCtx ctx;
  attention_forward(x, p, table, nullptr, mesh.area_weights, {true}, &ctx);
  for (int h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < table.nodes; ++i) {
      double sum = 0.0;
      for (int k = 0; k < table.width; ++k) {
        const double a = ctx.attn[h].at(i, k);
        CHECK(a >= 0.0);
        if (!table.is_valid(i, k)) CHECK(a == 0.0);
        sum += a;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("temperature clamps at 100 with zero subgradient") {
  const IcosphereMesh mesh = build_icosphere(1);
  const NeighborTable table = build_neighbor_table(mesh);
  RngState rng(109);
  AttentionParams p = AttentionParams::init(1, 4, rng);
  Matrix x(mesh.vertex_count(), 4);
  testutil::fill_uniform(x, rng, -1.0, 1.0);

  AttentionParams clamped = p;
  clamped.s[0] = std::log(1e6);
  AttentionParams at_cap = p;
  at_cap.s[0] = std::log(kTauMax);

  AttentionCtx c1, c2;
  const Matrix y1 = attention_forward(x, clamped, table, nullptr,
                                      mesh.area_weights, {true}, &c1);
  const Matrix y2 = attention_forward(x, at_cap, table, nullptr,
                                      mesh.area_weights, {true}, &c2);
  for (std::size_t i = 0; i < y1.a.size(); ++i)
    CHECK(y1.a[i] == doctest::Approx(y2.a[i]).epsilon(1e-14));

  Matrix gy(mesh.vertex_count(), 4);
  testutil::fill_uniform(gy, rng, -1.0, 1.0);
  clamped.zero_grad();
  attention_backward(clamped, c1, table, gy, {true}, nullptr);
  CHECK(clamped.gs[0] == 0.0);

  // Below the cap the temperature gradient is live.
  AttentionParams free = p;
  free.s[0] = 1.0;
  AttentionCtx c3;
  attention_forward(x, free, table, nullptr, mesh.area_weights, {true}, &c3);
  free.zero_grad();
  attention_backward(free, c3, table, gy, {true}, nullptr);
  CHECK(free.gs[0] != 0.0);
}

TEST_CASE("bad inputs are rejected") {
  const IcosphereMesh mesh = build_icosphere(1);
  const NeighborTable table = build_neighbor_table(mesh);
  RngState rng(113);
  AttentionParams p = AttentionParams::init(2, 8, rng);
  Matrix x(mesh.vertex_count(), 8);
  testutil::fill_uniform(x, rng, -1.0, 1.0);

  Matrix bad = x;
  bad.at(3, 2) = std::nan("");
  CHECK_THROWS_AS(attention_forward(bad, p, table, nullptr, mesh.area_weights,
                                    {true}, nullptr),
                  DataError);

  std::vector<double> neg = mesh.area_weights;
  neg[5] = -1.0;
  CHECK_THROWS_AS(attention_forward(x, p, table, nullptr, neg, {true}, nullptr),
                  DataError);

  Matrix wrong(mesh.vertex_count(), 6);
  CHECK_THROWS_AS(attention_forward(wrong, p, table, nullptr,
                                    mesh.area_weights, {true}, nullptr),
                  ConfigError);
}

TEST_CASE("gradients match central finite differences") {
  const IcosphereMesh mesh = build_icosphere(1);
  const NeighborTable table = build_neighbor_table(mesh);
  RngState rng(127);
  AttentionParams p = AttentionParams::init(2, 8, rng);
  const std::size_t L = mesh.vertex_count();
  Matrix x(L, 8);
  testutil::fill_uniform(x, rng, -1.0, 1.0);
  std::vector<double> bias(L * table.width * 2);
  testutil::fill_uniform(bias, rng, -0.5, 0.5);
  Matrix r(L, 8);
  testutil::fill_uniform(r, rng, -1.0, 1.0);

  const AttentionOptions opts{true};
  const auto loss = [&]() {
    const Matrix y =
        attention_forward(x, p, table, &bias, mesh.area_weights, opts, nullptr);
    return testutil::probe(y, r);
  };

  AttentionCtx ctx;
  attention_forward(x, p, table, &bias, mesh.area_weights, opts, &ctx);
  p.zero_grad();
  std::vector<double> gbias(bias.size(), 0.0);
  const Matrix gx = attention_backward(p, ctx, table, r, opts, &gbias);

  CHECK(testutil::rel_err(p.gwq, testutil::fd_gradient(p.wq, loss)) < 1e-6);
  CHECK(testutil::rel_err(p.gwk, testutil::fd_gradient(p.wk, loss)) < 1e-6);
  CHECK(testutil::rel_err(p.gwv, testutil::fd_gradient(p.wv, loss)) < 1e-6);
  CHECK(testutil::rel_err(p.gwo, testutil::fd_gradient(p.wo, loss)) < 1e-6);
  CHECK(testutil::rel_err(p.gs, testutil::fd_gradient(p.s, loss)) < 1e-6);
  CHECK(testutil::rel_err(gbias, testutil::fd_gradient(bias, loss)) < 1e-6);
  CHECK(testutil::rel_err(gx.a, testutil::fd_gradient(x.a, loss)) < 1e-6);
}
