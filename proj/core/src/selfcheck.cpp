#include "icoseg/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "icoseg/attention.hpp"
#include "icoseg/common.hpp"
#include "icoseg/config.hpp"
#include "icoseg/dataset.hpp"
#include "icoseg/gauge_bias.hpp"
#include "icoseg/geometry.hpp"
#include "icoseg/icosphere.hpp"
#include "icoseg/model.hpp"
#include "icoseg/rng.hpp"
#include "icoseg/so3.hpp"
#include "icoseg/train.hpp"

namespace icoseg {
namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Collects assertions and their measured values for one check.
struct Gate {
  bool pass = true;
  std::string detail;

  void note(const std::string& s) {
    if (!detail.empty()) detail += "; ";
    detail += s;
  }
  // value must stay within tol (inclusive).
  void bound(double value, double tol, const std::string& what) {
    const bool ok = value <= tol;
    if (!ok) pass = false;
    note(what + " = " + num(value) + (ok ? "" : " EXCEEDS") + " (tol " +
         num(tol) + ")");
  }
  // condition that is either met or not, no interesting magnitude.
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    note(what + (ok ? " ok" : " FAILED"));
  }
};

template <typename Body>
CheckResult timed_check(const char* name, double budget_seconds, Body&& body) {
  CheckResult r;
  r.name = name;
  r.budget_seconds = budget_seconds;
  Gate g;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(g);
    r.pass = g.pass;
    r.detail = g.detail;
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = g.detail.empty() ? std::string() : g.detail + "; ";
    r.detail += std::string("exception: ") + e.what();
  }
  r.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (r.seconds > budget_seconds) {
    r.pass = false;
    r.detail += "; wall time " + num(r.seconds) + "s exceeds budget " +
                num(budget_seconds) + "s";
  }
  return r;
}

void fill_uniform(std::vector<double>& v, RngState& rng, double lo, double hi) {
  for (double& x : v) x = rng.uniform(lo, hi);
}

void fill_uniform(Matrix& m, RngState& rng, double lo, double hi) {
  fill_uniform(m.a, rng, lo, hi);
}

double probe(const Matrix& y, const Matrix& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.a.size(); ++i) s += y.a[i] * r.a[i];
  return s;
}

// Relative L2 error of `got` against `want`.
double rel_err(const std::vector<double>& got, const std::vector<double>& want) {
  double nd = 0.0, dd = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double d = got[i] - want[i];
    nd += d * d;
    dd += want[i] * want[i];
  }
  return std::sqrt(nd / std::max(dd, 1e-300));
}

double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

constexpr double kFdStep = 1e-5;

template <typename Loss>
std::vector<double> fd_gradient(std::vector<double>& params, Loss&& loss) {
  std::vector<double> g(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double save = params[i];
    params[i] = save + kFdStep;
    const double up = loss();
    params[i] = save - kFdStep;
    const double dn = loss();
    params[i] = save;
    g[i] = (up - dn) / (2.0 * kFdStep);
  }
  return g;
}

bool is_permutation_map(const std::vector<std::int32_t>& idx) {
  std::vector<std::uint8_t> seen(idx.size(), 0);
  for (const std::int32_t j : idx) {
    if (j < 0 || static_cast<std::size_t>(j) >= idx.size()) return false;
    if (seen[static_cast<std::size_t>(j)]) return false;
    seen[static_cast<std::size_t>(j)] = 1;
  }
  return true;
}

bool composes_to_identity(const std::vector<std::int32_t>& a,
                          const std::vector<std::int32_t>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t t = 0; t < a.size(); ++t)
    if (a[static_cast<std::size_t>(b[t])] != static_cast<std::int32_t>(t))
      return false;
  return true;
}

// Plain cosine-softmax attention written as straight per-node loops, with
// none of the production path's running-max or fused-slice machinery. Kept
// deliberately separate so the two implementations can cross-check.
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
        if (bias) logit += (*bias)[(i * table.width + kk) * H + h];
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

FourierBiasTable random_bias_table(int heads, int order, int bins,
                                   RngState& rng) {
  FourierBiasTable t = FourierBiasTable::zeros(heads, order, bins);
  fill_uniform(t.A, rng, -0.8, 0.8);
  fill_uniform(t.Bc, rng, -0.8, 0.8);
  return t;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Adds an independent angle to every frame of each anchor candidate; the
// pooled bias of a low-order table must not move.
GeodesicCache rotate_anchor_frames(const GeodesicCache& cache, RngState& rng) {
  GeodesicCache turned = cache;
  for (std::size_t i = 0; i < cache.nodes; ++i) {
    for (std::int32_t a = cache.closure_offset[i];
         a < cache.closure_offset[i + 1]; ++a) {
      const double theta = rng.uniform(-kPi, kPi);
      for (int k = 0; k < cache.width; ++k)
        turned.closure_alpha[static_cast<std::size_t>(a) * cache.width + k] +=
            theta;
    }
  }
  return turned;
}

double seg_pipeline_loss(const SphericalUNet& m, const GeometryBundle& gb,
                         const Matrix& field,
                         const std::vector<std::int32_t>& labels) {
  const Matrix tokens = m.project_tokens(field, gb, nullptr);
  return seg_loss(m.forward(tokens, gb, nullptr), labels, m.cfg.num_classes)
      .value;
}

struct FlatParams {
  std::vector<std::vector<double>*> vals;
  std::vector<std::vector<double>*> grads;

  explicit FlatParams(SphericalUNet& m) {
    m.visit_params([this](const std::string&,
                          const std::vector<std::uint64_t>&,
                          std::vector<double>& value,
                          std::vector<double>& grad) {
      vals.push_back(&value);
      grads.push_back(&grad);
    });
  }
  void shift(const std::vector<std::vector<double>>& dir, double h) {
    for (std::size_t t = 0; t < vals.size(); ++t)
      for (std::size_t i = 0; i < dir[t].size(); ++i)
        (*vals[t])[i] += h * dir[t][i];
  }
  std::vector<std::vector<double>> random_direction(RngState& rng) const {
    std::vector<std::vector<double>> dir(vals.size());
    for (std::size_t t = 0; t < vals.size(); ++t) {
      dir[t].resize(vals[t]->size());
      for (double& d : dir[t]) d = rng.uniform(-1.0, 1.0);
    }
    return dir;
  }
  double dot_grad(const std::vector<std::vector<double>>& dir) const {
    double s = 0.0;
    for (std::size_t t = 0; t < grads.size(); ++t)
      for (std::size_t i = 0; i < dir[t].size(); ++i)
        s += dir[t][i] * (*grads[t])[i];
    return s;
  }
};

}  // namespace

CheckResult check_mesh_invariants() {
  return timed_check("mesh-invariants", 10.0, [](Gate& g) {
    bool counts_ok = true;
    double worst_area = 0.0, worst_mean = 0.0;
    for (int r = 0; r <= 5; ++r) {
      const IcosphereMesh mesh = build_icosphere(r);
      const std::size_t pow4 = std::size_t{1} << (2 * r);
      const std::size_t V = mesh.vertex_count();
      const std::size_t E = mesh.edge_count();
      const std::size_t F = mesh.face_count();
      counts_ok = counts_ok && V == 10 * pow4 + 2 && E == 30 * pow4 &&
                  F == 20 * pow4 &&
                  static_cast<long long>(V) - static_cast<long long>(E) +
                          static_cast<long long>(F) ==
                      2;
      worst_area =
          std::max(worst_area, std::abs(mesh.raw_area_sum - 4.0 * kPi));
      double mean = 0.0;
      for (const double w : mesh.area_weights) mean += w;
      mean /= static_cast<double>(V);
      worst_mean = std::max(worst_mean, std::abs(mean - 1.0));
    }
    g.require(counts_ok, "node/edge/face counts and Euler number, ranks 0-5");
    g.bound(worst_area, 1e-9, "max |total area - 4*pi|");
    g.bound(worst_mean, 1e-12, "max |mean area weight - 1|");
  });
}

CheckResult check_attention_quadrature() {
  return timed_check("attention-quadrature", 1.0, [](Gate& g) {
    const IcosphereMesh mesh = build_icosphere(1);
    const NeighborTable table = build_neighbor_table(mesh);
    RngState rng(9001);
    const AttentionParams p = AttentionParams::init(2, 8, rng);
    Matrix x(mesh.vertex_count(), 8);
    fill_uniform(x, rng, -1.0, 1.0);

    // Unit area weights and no additive bias: the quadrature term is
    // exactly log(1) = 0 and the production path must agree with the plain
    // reference to near machine precision.
    const std::vector<double> ones(mesh.vertex_count(), 1.0);
    const Matrix y1 =
        attention_forward(x, p, table, nullptr, ones, {true}, nullptr);
    const Matrix ref1 = reference_attention(x, p, table, nullptr, ones, true);
    g.bound(max_abs_diff(y1.a, ref1.a), 1e-12,
            "max |production - reference| (unit weights, no bias)");

    // True area weights plus a random additive bias.
    std::vector<double> bias(mesh.vertex_count() * table.width * 2);
    fill_uniform(bias, rng, -1.0, 1.0);
    const Matrix y2 = attention_forward(x, p, table, &bias, mesh.area_weights,
                                        {true}, nullptr);
    const Matrix ref2 =
        reference_attention(x, p, table, &bias, mesh.area_weights, true);
    g.bound(max_abs_diff(y2.a, ref2.a), 1e-12,
            "max |production - reference| (area weights, random bias)");

    // Two neighbors with identical keys and area weights (2, 1) must split
    // attention exactly (2/3, 1/3).
    NeighborTable two;
    two.nodes = 3;
    two.width = 2;
    two.indices = {1, 2, 1, 2, 1, 2};
    two.valid = {1, 1, 1, 1, 1, 1};
    RngState rng2(9002);
    const AttentionParams p2 = AttentionParams::init(2, 6, rng2);
    Matrix x2(3, 6);
    fill_uniform(x2, rng2, -1.0, 1.0);
    for (int d = 0; d < 6; ++d) x2.at(2, d) = x2.at(1, d);
    const std::vector<double> omega = {1.0, 2.0, 1.0};
    AttentionCtx ctx;
    attention_forward(x2, p2, two, nullptr, omega, {true}, &ctx);
    double worst = 0.0;
    for (int h = 0; h < 2; ++h) {
      worst = std::max(worst, std::abs(ctx.attn[h].at(0, 0) - 2.0 / 3.0));
      worst = std::max(worst, std::abs(ctx.attn[h].at(0, 1) - 1.0 / 3.0));
    }
    g.bound(worst, 1e-12, "max |tied-key split - (2/3, 1/3)|");
  });
}

CheckResult check_frame_pooling() {
  return timed_check("frame-pooling", 5.0, [](Gate& g) {
    const IcosphereMesh mesh = build_icosphere(1);
    const NeighborTable table = build_neighbor_table(mesh);
    const GeodesicCache cache = build_geodesic_cache(mesh, table, 3, 16);
    RngState rng(777);

    // Orders 1..5 only contain modes the six-fold pooling cancels, so
    // rotating every anchor frame by its own angle must change nothing.
    double worst_turn = 0.0;
    for (int order = 1; order <= 5; ++order) {
      const FourierBiasTable t = random_bias_table(2, order, 16, rng);
      const std::vector<double> ref =
          eval_bias(t, cache, build_bias_workspace(cache, order));
      const GeodesicCache turned = rotate_anchor_frames(cache, rng);
      const std::vector<double> got =
          eval_bias(t, turned, build_bias_workspace(turned, order));
      worst_turn = std::max(worst_turn, max_abs_diff(ref, got));
    }
    g.bound(worst_turn, 1e-9,
            "max bias change under per-anchor frame rotation, orders 1-5");

    // A global shift by exactly one pooling step (sixty degrees) is a
    // symmetry of the six-fold average at every order.
    double worst_shift = 0.0;
    for (const int order : {6, 9}) {
      const FourierBiasTable t = random_bias_table(2, order, 16, rng);
      const std::vector<double> ref =
          eval_bias(t, cache, build_bias_workspace(cache, order));
      GeodesicCache shifted = cache;
      for (double& a : shifted.closure_alpha) a += 2.0 * kPi / 6.0;
      const std::vector<double> got =
          eval_bias(t, shifted, build_bias_workspace(shifted, order));
      worst_shift = std::max(worst_shift, max_abs_diff(ref, got));
    }
    g.bound(worst_shift, 1e-9,
            "max bias change under a global sixty-degree shift, orders {6,9}");

    // Only the sixth cosine harmonic set: the pooled value must equal the
    // brute-force average over anchors and the six frame rotations.
    FourierBiasTable six = FourierBiasTable::zeros(2, 6, 16);
    for (int h = 0; h < 2; ++h)
      for (int b = 0; b < 16; ++b)
        six.A[six.idx(h, 6, b)] = rng.uniform(-1.0, 1.0);
    const BiasWorkspace ws = build_bias_workspace(cache, 6);
    const std::vector<double> got = eval_bias(six, cache, ws);
    double worst_brute = 0.0;
    for (std::size_t i = 0; i < cache.nodes; ++i) {
      for (int k = 0; k < cache.width; ++k) {
        const std::size_t s = cache.slot(i, k);
        if (!cache.valid[s] || cache.degenerate[s]) continue;
        const double eta = cache.bin_frac[s];
        for (int h = 0; h < 2; ++h) {
          const double a6 =
              (1.0 - eta) * six.A[six.idx(h, 6, cache.bin_lo[s])] +
              eta * six.A[six.idx(h, 6, cache.bin_hi[s])];
          double acc = 0.0;
          for (std::int32_t a = cache.closure_offset[i];
               a < cache.closure_offset[i + 1]; ++a) {
            const double w = cache.closure_weight[a] /
                             (6.0 * static_cast<double>(cache.anchors));
            const double alpha =
                cache.closure_alpha[static_cast<std::size_t>(a) * cache.width +
                                    k];
            for (int r = 0; r < 6; ++r)
              acc += w * a6 * std::cos(6.0 * (alpha - 2.0 * kPi * r / 6.0));
          }
          worst_brute = std::max(worst_brute, std::abs(got[s * 2 + h] - acc));
        }
      }
    }
    g.bound(worst_brute, 1e-9,
            "max |pooled sixth harmonic - brute-force sum|");
  });
}

CheckResult check_gradients() {
  return timed_check("gradient-checks", 120.0, [](Gate& g) {
    // Attention parameters, additive bias, and input, on a rank-1 mesh.
    {
      const IcosphereMesh mesh = build_icosphere(1);
      const NeighborTable table = build_neighbor_table(mesh);
      RngState rng(31337);
      AttentionParams p = AttentionParams::init(2, 8, rng);
      const std::size_t L = mesh.vertex_count();
      Matrix x(L, 8);
      fill_uniform(x, rng, -1.0, 1.0);
      std::vector<double> bias(L * table.width * 2);
      fill_uniform(bias, rng, -0.5, 0.5);
      Matrix r(L, 8);
      fill_uniform(r, rng, -1.0, 1.0);

      const AttentionOptions opts{true};
      const auto loss = [&]() {
        return probe(attention_forward(x, p, table, &bias, mesh.area_weights,
                                       opts, nullptr),
                     r);
      };
      AttentionCtx ctx;
      attention_forward(x, p, table, &bias, mesh.area_weights, opts, &ctx);
      p.zero_grad();
      std::vector<double> gbias(bias.size(), 0.0);
      const Matrix gx = attention_backward(p, ctx, table, r, opts, &gbias);

      double worst = 0.0;
      worst = std::max(worst, rel_err(p.gwq, fd_gradient(p.wq, loss)));
      worst = std::max(worst, rel_err(p.gwk, fd_gradient(p.wk, loss)));
      worst = std::max(worst, rel_err(p.gwv, fd_gradient(p.wv, loss)));
      worst = std::max(worst, rel_err(p.gwo, fd_gradient(p.wo, loss)));
      worst = std::max(worst, rel_err(p.gs, fd_gradient(p.s, loss)));
      worst = std::max(worst, rel_err(gbias, fd_gradient(bias, loss)));
      std::vector<double> gxa = gx.a;
      worst = std::max(worst, rel_err(gxa, fd_gradient(x.a, loss)));
      g.bound(worst, 1e-4, "attention max rel grad err");

      // Past the temperature cap both the analytic gradient and the finite
      // difference are exactly zero: the clamp has a flat subgradient.
      AttentionParams capped = p;
      capped.s[0] = std::log(kTauMax) + 0.5;
      AttentionCtx cctx;
      attention_forward(x, capped, table, &bias, mesh.area_weights, opts,
                        &cctx);
      capped.zero_grad();
      attention_backward(capped, cctx, table, r, opts, nullptr);
      const auto closs = [&]() {
        return probe(attention_forward(x, capped, table, &bias,
                                       mesh.area_weights, opts, nullptr),
                     r);
      };
      const std::vector<double> fd_s = fd_gradient(capped.s, closs);
      g.require(capped.gs[0] == 0.0 && fd_s[0] == 0.0,
                "clamped temperature has exactly zero gradient");
    }

    // Fourier bias tables against finite differences on a real cache.
    {
      const IcosphereMesh mesh = build_icosphere(1);
      const NeighborTable table = build_neighbor_table(mesh);
      const GeodesicCache cache = build_geodesic_cache(mesh, table, 3, 16);
      const BiasWorkspace ws = build_bias_workspace(cache, 6);
      RngState rng(41);
      FourierBiasTable t = random_bias_table(2, 6, 16, rng);
      std::vector<double> upstream(cache.nodes * cache.width * 2);
      fill_uniform(upstream, rng, -1.0, 1.0);

      std::vector<double> gA(t.A.size(), 0.0), gBc(t.Bc.size(), 0.0);
      bias_backward(t, cache, ws, upstream, gA, gBc);
      const auto loss = [&]() {
        const std::vector<double> b = eval_bias(t, cache, ws);
        double j = 0.0;
        for (std::size_t s = 0; s < b.size(); ++s) j += upstream[s] * b[s];
        return j;
      };
      double worst = rel_err(gA, fd_gradient(t.A, loss));
      worst = std::max(worst, rel_err(gBc, fd_gradient(t.Bc, loss)));
      g.bound(worst, 1e-4, "bias table max rel grad err");
    }

    // Cross-rank resampling adjoints in both directions and both modes.
    {
      const IcosphereMesh fine = build_icosphere(2);
      const IcosphereMesh coarse = build_icosphere(1);
      const RankTransfer t = build_rank_transfer(fine, coarse);
      RngState rng(43);
      double worst = 0.0;
      for (const bool geo : {true, false}) {
        Matrix x(fine.vertex_count(), 4);
        fill_uniform(x, rng, -1.0, 1.0);
        Matrix rd(coarse.vertex_count(), 4);
        fill_uniform(rd, rng, -1.0, 1.0);
        const auto dloss = [&]() {
          return probe(downsample(t, x, fine.area_weights, geo), rd);
        };
        const Matrix gx = downsample_backward(t, rd, fine.area_weights, geo);
        std::vector<double> gxa = gx.a;
        worst = std::max(worst, rel_err(gxa, fd_gradient(x.a, dloss)));

        Matrix y(coarse.vertex_count(), 4);
        fill_uniform(y, rng, -1.0, 1.0);
        Matrix ru(fine.vertex_count(), 4);
        fill_uniform(ru, rng, -1.0, 1.0);
        const auto uloss = [&]() { return probe(upsample(t, y, geo), ru); };
        const Matrix gy = upsample_backward(t, ru, geo);
        std::vector<double> gya = gy.a;
        worst = std::max(worst, rel_err(gya, fd_gradient(y.a, uloss)));
      }
      g.bound(worst, 1e-4, "resampling max rel grad err");
    }

    // Projection -> backbone -> loss, differentiated end to end, probed
    // along random parameter directions and token directions.
    {
      ModelConfig cfg;
      cfg.output_rank = 2;
      cfg.dim = 8;
      cfg.heads = 2;
      cfg.blocks_per_stage = 1;
      cfg.num_classes = 5;
      cfg.abs_lat_pe = true;
      const GeometryBundle gb = GeometryBundle::build(cfg);
      RngState rng(2025);
      SphericalUNet m = SphericalUNet::init(cfg, rng);

      Matrix field(gb.output_mesh.vertex_count(), 3);
      fill_uniform(field, rng, 0.0, 1.0);
      std::vector<std::int32_t> labels(gb.output_mesh.vertex_count());
      for (auto& y : labels)
        y = static_cast<std::int32_t>(rng.uniform_index(cfg.num_classes));

      m.zero_grad();
      SphericalUNet::ProjCtx pc;
      SphericalUNet::Trace trace;
      const Matrix tokens = m.project_tokens(field, gb, &pc);
      const Matrix logits = m.forward(tokens, gb, &trace);
      const SegLossResult loss = seg_loss(logits, labels, cfg.num_classes);
      const Matrix gtokens = m.backward(trace, loss.glogits, gb);
      m.project_backward(pc, gtokens);

      FlatParams fp(m);
      double worst = 0.0;
      for (int probe_i = 0; probe_i < 3; ++probe_i) {
        const auto dir = fp.random_direction(rng);
        const double analytic = fp.dot_grad(dir);
        fp.shift(dir, kFdStep);
        const double up = seg_pipeline_loss(m, gb, field, labels);
        fp.shift(dir, -2.0 * kFdStep);
        const double dn = seg_pipeline_loss(m, gb, field, labels);
        fp.shift(dir, kFdStep);
        worst = std::max(worst, rel_diff(analytic, (up - dn) / (2.0 * kFdStep)));
      }
      g.bound(worst, 1e-4, "pipeline directional grad err (params)");

      double worst_tok = 0.0;
      for (int probe_i = 0; probe_i < 2; ++probe_i) {
        Matrix dir(tokens.rows, tokens.cols);
        fill_uniform(dir, rng, -1.0, 1.0);
        double analytic = 0.0;
        for (std::size_t i = 0; i < dir.a.size(); ++i)
          analytic += dir.a[i] * gtokens.a[i];
        const auto loss_at = [&](double h) {
          Matrix t2 = tokens;
          for (std::size_t i = 0; i < t2.a.size(); ++i)
            t2.a[i] += h * dir.a[i];
          return seg_loss(m.forward(t2, gb, nullptr), labels, cfg.num_classes)
              .value;
        };
        const double fd =
            (loss_at(kFdStep) - loss_at(-kFdStep)) / (2.0 * kFdStep);
        worst_tok = std::max(worst_tok, rel_diff(analytic, fd));
      }
      g.bound(worst_tok, 1e-4, "pipeline directional grad err (tokens)");
    }

    // The two loss heads by themselves, entry by entry.
    {
      RngState rng(47);
      Matrix logits(30, 5);
      fill_uniform(logits, rng, -2.0, 2.0);
      std::vector<std::int32_t> labels(30);
      for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = static_cast<std::int32_t>(rng.uniform_index(5));
      labels[3] = 0;
      labels[17] = 0;
      const SegLossResult sl = seg_loss(logits, labels, 5);
      const auto sloss = [&]() { return seg_loss(logits, labels, 5).value; };
      std::vector<double> gl = sl.glogits.a;
      double worst = rel_err(gl, fd_gradient(logits.a, sloss));

      Matrix z_rot(20, 5), z_tgt(20, 5);
      fill_uniform(z_rot, rng, -1.0, 1.0);
      fill_uniform(z_tgt, rng, -1.0, 1.0);
      const EqLossResult eq = eq_loss_term(z_rot, z_tgt);
      const auto eloss = [&]() { return eq_loss_term(z_rot, z_tgt).value; };
      std::vector<double> ge = eq.g_zrot.a;
      worst = std::max(worst, rel_err(ge, fd_gradient(z_rot.a, eloss)));
      g.bound(worst, 1e-4, "loss-head max rel grad err");
    }
  });
}

CheckResult check_rotation_equivariance() {
  return timed_check("rotation-equivariance", 300.0, [](Gate& g) {
    ModelConfig cfg;
    cfg.output_rank = 4;
    cfg.abs_lat_pe = false;
    const GeometryBundle gb = GeometryBundle::build(cfg);
    const IcosphereMesh& tok = gb.at(gb.token_rank).mesh;
    const IcosphereMesh& out = gb.output_mesh;

    const std::vector<Rotation> group = icosahedral_rotation_group();
    g.require(group.size() == 60, "symmetry group has sixty elements");

    bool perms_ok = true, inverses_ok = true;
    std::vector<RotationMapSet> maps;
    maps.reserve(group.size());
    for (const Rotation& rot : group) {
      maps.push_back(build_rotation_maps(rot, tok, out));
      const RotationMapSet inv = build_rotation_maps(rot.inverse(), tok, out);
      const RotationMapSet& fwd = maps.back();
      perms_ok = perms_ok && is_permutation_map(fwd.idx_proj) &&
                 is_permutation_map(fwd.idx_img) &&
                 is_permutation_map(inv.idx_proj) &&
                 is_permutation_map(inv.idx_img);
      inverses_ok = inverses_ok &&
                    composes_to_identity(fwd.idx_proj, inv.idx_proj) &&
                    composes_to_identity(inv.idx_proj, fwd.idx_proj) &&
                    composes_to_identity(fwd.idx_img, inv.idx_img) &&
                    composes_to_identity(inv.idx_img, fwd.idx_img);
    }
    g.require(perms_ok, "all sixty node maps are exact permutations");
    g.require(inverses_ok, "inverse maps compose to the identity both ways");

    // A rotated input field must produce the correspondingly rotated
    // logits. The comparison runs the full field -> logits map because the
    // absolute-latitude encoding (when enabled) lives in the projection and
    // is precisely what breaks the symmetry.
    Matrix field(out.vertex_count(), 3);
    RngState frng(515151);
    fill_uniform(field, frng, 0.0, 1.0);

    const auto worst_mse = [&](const SphericalUNet& m) {
      const Matrix z_base =
          m.forward(m.project_tokens(field, gb, nullptr), gb, nullptr);
      double worst = 0.0;
      for (const RotationMapSet& ms : maps) {
        const Matrix rot_field = gather_rows(field, ms.idx_img);
        const Matrix z_rot =
            m.forward(m.project_tokens(rot_field, gb, nullptr), gb, nullptr);
        const Matrix target = gather_rows(z_base, ms.idx_img);
        double mse = 0.0;
        for (std::size_t i = 0; i < z_rot.a.size(); ++i) {
          const double d = z_rot.a[i] - target.a[i];
          mse += d * d;
        }
        worst = std::max(worst, mse / static_cast<double>(z_rot.a.size()));
      }
      return worst;
    };

    RngState rng_off(626262);
    const SphericalUNet plain = SphericalUNet::init(cfg, rng_off);
    const double mse_off = worst_mse(plain);
    g.bound(mse_off, 1e-3,
            "max logit mse over the sixty rotations, latitude encoding off");

    ModelConfig cfg_pe = cfg;
    cfg_pe.abs_lat_pe = true;
    RngState rng_on(626262);
    const SphericalUNet pe = SphericalUNet::init(cfg_pe, rng_on);
    const double mse_on = worst_mse(pe);
    const double ratio = mse_on / std::max(mse_off, 1e-300);
    g.require(mse_on >= 10.0 * mse_off,
              "latitude encoding breaks the symmetry by >= 10x (ratio " +
                  num(ratio) + ")");
  });
}

CheckResult check_consistency_loss() {
  return timed_check("consistency-loss", 30.0, [](Gate& g) {
    Config cfg;
    cfg.model.output_rank = 3;
    cfg.model.dim = 16;
    cfg.model.heads = 2;
    cfg.model.blocks_per_stage = 1;
    const GeometryBundle gb = GeometryBundle::build(cfg.model);
    const IcosphereMesh& tok = gb.at(gb.token_rank).mesh;
    const IcosphereMesh& out = gb.output_mesh;

    RngState rng(737373);
    SphericalUNet m = SphericalUNet::init(cfg.model, rng);
    Matrix field(out.vertex_count(), 3);
    fill_uniform(field, rng, 0.0, 1.0);
    const Matrix tokens = m.project_tokens(field, gb, nullptr);

    // Identity rotation: both node maps are the identity permutation, the
    // two forward passes see bit-identical inputs, and the loss is exactly
    // zero, not merely small.
    const RotationMapSet id_maps =
        build_rotation_maps(Rotation::identity(), tok, out);
    bool id_ok = true;
    for (std::size_t t = 0; t < id_maps.idx_proj.size(); ++t)
      id_ok = id_ok && id_maps.idx_proj[t] == static_cast<std::int32_t>(t);
    for (std::size_t t = 0; t < id_maps.idx_img.size(); ++t)
      id_ok = id_ok && id_maps.idx_img[t] == static_cast<std::int32_t>(t);
    g.require(id_ok, "identity rotation maps are identity permutations");

    const Matrix z = m.forward(tokens, gb, nullptr);
    const Matrix z_rot =
        m.forward(gather_rows(tokens, id_maps.idx_proj), gb, nullptr);
    const EqLossResult e0 =
        eq_loss_term(z_rot, gather_rows(z, id_maps.idx_img));
    g.require(e0.value == 0.0,
              "consistency loss under the identity is exactly zero");

    // Stop-gradient contract: the analytic gradient equals the derivative
    // of the frozen-target objective, while the target branch, if it were
    // live, would contribute a materially different derivative.
    const Rotation r = sample_rotation_uniform(rng);
    const RotationMapSet maps = build_rotation_maps(r, tok, out);
    const Matrix tokens_rot = gather_rows(tokens, maps.idx_proj);
    const double lambda = cfg.model.lambda_eq;

    const Matrix target = gather_rows(z, maps.idx_img);  // frozen copy
    m.zero_grad();
    SphericalUNet::Trace trace;
    const Matrix zr = m.forward(tokens_rot, gb, &trace);
    const EqLossResult eq = eq_loss_term(zr, target);
    Matrix gz = eq.g_zrot;
    for (double& v : gz.a) v *= lambda;
    m.backward(trace, gz, gb);

    FlatParams fp(m);
    const auto frozen_loss = [&]() {
      return lambda *
             eq_loss_term(m.forward(tokens_rot, gb, nullptr), target).value;
    };
    const auto unfrozen_loss = [&]() {
      return lambda * eq_loss_term(m.forward(tokens_rot, gb, nullptr),
                                   gather_rows(m.forward(tokens, gb, nullptr),
                                               maps.idx_img))
                          .value;
    };
    const auto target_only_loss = [&]() {
      return lambda * eq_loss_term(zr, gather_rows(m.forward(tokens, gb,
                                                             nullptr),
                                                   maps.idx_img))
                          .value;
    };

    double worst_frozen = 0.0, best_target = 0.0;
    RngState drng(83);
    for (int probe_i = 0; probe_i < 2; ++probe_i) {
      const auto dir = fp.random_direction(drng);
      const double analytic = fp.dot_grad(dir);
      const auto fd_of = [&](const auto& loss) {
        fp.shift(dir, kFdStep);
        const double up = loss();
        fp.shift(dir, -2.0 * kFdStep);
        const double dn = loss();
        fp.shift(dir, kFdStep);
        return (up - dn) / (2.0 * kFdStep);
      };
      const double fd_frozen = fd_of(frozen_loss);
      const double fd_target = fd_of(target_only_loss);
      worst_frozen = std::max(worst_frozen, rel_diff(analytic, fd_frozen));
      best_target = std::max(best_target, std::abs(fd_target));
      // The full (unfrozen) derivative splits into the two branches; the
      // analytic gradient must track only the rotated one.
      const double fd_unfrozen = fd_of(unfrozen_loss);
      if (!(std::abs(fd_unfrozen - analytic) >
            0.25 * std::abs(fd_target) - 1e-9)) {
        g.require(false, "analytic gradient appears to include the target "
                         "branch");
      }
    }
    g.bound(worst_frozen, 1e-4,
            "directional grad err vs frozen-target objective");
    g.require(best_target > 1e-9,
              "target branch is live when unfrozen (|d/dh| = " +
                  num(best_target) + ")");

    // Reported totals: with one training sample per epoch the arithmetic
    // is exact, so the identity total = seg + 0.05 * consistency must hold
    // bitwise, with the default weight equal to 0.05 exactly.
    g.require(cfg.model.lambda_eq == 0.05,
              "default consistency weight is exactly 0.05");
    const std::vector<SegSample> data = make_synthetic_dataset(out, 1, 99);
    Config tc = cfg;
    tc.train.epochs = 1;
    tc.train.val_fraction = 0.0;
    tc.train.lr = 1e-4;
    RngState mrng(88);
    SphericalUNet m2 = SphericalUNet::init(cfg.model, mrng);
    const TrainResult res = train_model(m2, gb, data, tc, nullptr);
    g.require(!res.epochs.empty() && res.epochs.front().eq_loss > 0.0,
              "consistency term is active during training");
    const EpochRecord& rec = res.epochs.front();
    g.require(rec.total_loss ==
                  rec.seg_loss + cfg.model.lambda_eq * rec.eq_loss,
              "reported total equals seg + 0.05 * consistency bitwise");
  });
}

std::vector<CheckResult> run_all_checks() {
  std::vector<CheckResult> results;
  results.push_back(check_mesh_invariants());
  results.push_back(check_attention_quadrature());
  results.push_back(check_frame_pooling());
  results.push_back(check_gradients());
  results.push_back(check_rotation_equivariance());
  results.push_back(check_consistency_loss());
  return results;
}

}  // namespace icoseg
