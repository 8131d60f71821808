#include "icoseg/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace icoseg {

void glorot_fill(std::vector<double>& w, int fan_in, int fan_out,
                 RngState& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w) v = rng.uniform(-a, a);
}

AttentionParams AttentionParams::init(int heads, int dim, RngState& rng) {
  if (heads < 1 || dim < 1 || dim % heads != 0)
    throw ConfigError("attention requires dim divisible by heads");
  AttentionParams p;
  p.heads = heads;
  p.dim = dim;
  p.head_dim = dim / heads;

  const std::size_t per_head = static_cast<std::size_t>(dim) * p.head_dim;
  p.wq.resize(per_head * heads);
  p.wk.resize(per_head * heads);
  p.wv.resize(per_head * heads);
  p.wo.resize(static_cast<std::size_t>(dim) * dim);
  p.s.assign(heads, std::log(10.0));

  // Projections are initialized per head with head-level fan shapes.
  for (int h = 0; h < heads; ++h) {
    std::vector<double> tmp(per_head);
    glorot_fill(tmp, dim, p.head_dim, rng);
    std::copy(tmp.begin(), tmp.end(), p.wq.begin() + h * per_head);
    glorot_fill(tmp, dim, p.head_dim, rng);
    std::copy(tmp.begin(), tmp.end(), p.wk.begin() + h * per_head);
    glorot_fill(tmp, dim, p.head_dim, rng);
    std::copy(tmp.begin(), tmp.end(), p.wv.begin() + h * per_head);
  }
  glorot_fill(p.wo, dim, dim, rng);

  p.zero_grad();
  return p;
}

void AttentionParams::zero_grad() {
  gwq.assign(wq.size(), 0.0);
  gwk.assign(wk.size(), 0.0);
  gwv.assign(wv.size(), 0.0);
  gwo.assign(wo.size(), 0.0);
  gs.assign(s.size(), 0.0);
}

namespace {

// out (L x hd) = x (L x D) * w (D x hd)
Matrix project(const Matrix& x, const double* w, int hd) {
  Matrix out(x.rows, static_cast<std::size_t>(hd));
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double* orow = out.row(r);
    for (std::size_t d = 0; d < x.cols; ++d) {
      const double xv = xr[d];
      if (xv == 0.0) continue;
      const double* wrow = w + d * hd;
      for (int e = 0; e < hd; ++e) orow[e] += xv * wrow[e];
    }
  }
  return out;
}

Matrix row_normalize(const Matrix& x) {
  Matrix out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double n = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) n += xr[c] * xr[c];
    n = std::sqrt(n);
    const double inv = 1.0 / (n + kNormEps);
    double* orow = out.row(r);
    for (std::size_t c = 0; c < x.cols; ++c) orow[c] = xr[c] * inv;
  }
  return out;
}

// d(loss)/draw for y = raw / (|raw| + eps).
void row_normalize_backward(const Matrix& raw, const Matrix& gy, Matrix& graw) {
  for (std::size_t r = 0; r < raw.rows; ++r) {
    const double* u = raw.row(r);
    const double* g = gy.row(r);
    double n2 = 0.0, ug = 0.0;
    for (std::size_t c = 0; c < raw.cols; ++c) {
      n2 += u[c] * u[c];
      ug += u[c] * g[c];
    }
    const double n = std::sqrt(n2);
    const double d = n + kNormEps;
    // (ug / n) is bounded by |g| (Cauchy-Schwarz) and d*d never underflows,
    // so this stays finite for arbitrarily small n; an exactly-zero row has
    // Jacobian I/d, so the radial term drops out entirely.
    const double k2 = n > 0.0 ? (ug / n) / (d * d) : 0.0;
    double* out = graw.row(r);
    for (std::size_t c = 0; c < raw.cols; ++c)
      out[c] += g[c] / d - u[c] * k2;
  }
}

}  // namespace

Matrix attention_forward(const Matrix& x, const AttentionParams& p,
                         const NeighborTable& table,
                         const std::vector<double>* bias,
                         const std::vector<double>& omega,
                         const AttentionOptions& opts, AttentionCtx* ctx) {
  const std::size_t L = x.rows;
  const int H = p.heads;
  const int hd = p.head_dim;
  const int K = table.width;

  if (x.cols != static_cast<std::size_t>(p.dim))
    throw ConfigError("attention input width does not match dim");
  if (table.nodes != L)
    throw ConfigError("attention input rows do not match neighbor table");
  if (omega.size() != L)
    throw ConfigError("attention omega length does not match input");
  if (bias && bias->size() != L * static_cast<std::size_t>(K) * H)
    throw ConfigError("attention bias size mismatch");
  if (K > 16) throw ConfigError("attention supports neighbor width <= 16");
  if (x.has_non_finite()) throw DataError("attention input has non-finite values");
  for (double w : omega)
    if (!(w > 0.0) || !std::isfinite(w))
      throw DataError("attention requires positive finite area weights");

  const double log_tau_max = std::log(kTauMax);

  std::vector<Matrix> q(H), k(H), v(H), qraw(H), kraw(H);
  std::vector<Matrix> attn(H), uu(H);
  Matrix concat(L, static_cast<std::size_t>(p.dim));

  for (int h = 0; h < H; ++h) {
    qraw[h] = project(x, p.head_w(p.wq, h), hd);
    kraw[h] = project(x, p.head_w(p.wk, h), hd);
    v[h] = project(x, p.head_w(p.wv, h), hd);
    q[h] = row_normalize(qraw[h]);
    k[h] = row_normalize(kraw[h]);

    const double tau = std::exp(std::min(p.s[h], log_tau_max));
    attn[h] = Matrix(L, static_cast<std::size_t>(K));
    uu[h] = Matrix(L, static_cast<std::size_t>(K));

    for (std::size_t i = 0; i < L; ++i) {
      double row_max = -std::numeric_limits<double>::infinity();
      std::array<double, 16> logits{};  // width never exceeds 16
      for (int kk = 0; kk < K; ++kk) {
        if (!table.is_valid(i, kk)) {
          logits[kk] = -std::numeric_limits<double>::infinity();
          continue;
        }
        const std::int32_t j = table.at(i, kk);
        double u = 0.0;
        const double* qi = q[h].row(i);
        const double* kj = k[h].row(static_cast<std::size_t>(j));
        for (int e = 0; e < hd; ++e) u += qi[e] * kj[e];
        uu[h].at(i, kk) = u;

        double logit = tau * u;
        if (bias) logit += (*bias)[(i * K + kk) * H + h];
        if (opts.use_quadrature)
          logit += std::log(std::max(omega[static_cast<std::size_t>(j)], kOmegaFloor));
        logits[kk] = logit;
        row_max = std::max(row_max, logit);
      }
      double denom = 0.0;
      for (int kk = 0; kk < K; ++kk) {
        if (!table.is_valid(i, kk)) continue;
        const double e = std::exp(logits[kk] - row_max);
        attn[h].at(i, kk) = e;
        denom += e;
      }
      const double inv = 1.0 / denom;
      for (int kk = 0; kk < K; ++kk)
        if (table.is_valid(i, kk)) attn[h].at(i, kk) *= inv;
    }

    // Weighted value aggregation into the head's concat slice.
    for (std::size_t i = 0; i < L; ++i) {
      double* out = concat.row(i) + static_cast<std::size_t>(h) * hd;
      for (int kk = 0; kk < K; ++kk) {
        if (!table.is_valid(i, kk)) continue;
        const double a = attn[h].at(i, kk);
        const double* vj = v[h].row(static_cast<std::size_t>(table.at(i, kk)));
        for (int e = 0; e < hd; ++e) out[e] += a * vj[e];
      }
    }
  }

  Matrix y = matmul(concat, p.wo, static_cast<std::size_t>(p.dim));

  if (ctx) {
    ctx->x = x;
    ctx->qraw = std::move(qraw);
    ctx->q = std::move(q);
    ctx->kraw = std::move(kraw);
    ctx->k = std::move(k);
    ctx->v = std::move(v);
    ctx->attn = std::move(attn);
    ctx->u = std::move(uu);
    ctx->concat = std::move(concat);
  }
  return y;
}

Matrix attention_backward(AttentionParams& p, const AttentionCtx& ctx,
                          const NeighborTable& table, const Matrix& gy,
                          const AttentionOptions& opts,
                          std::vector<double>* gbias) {
  (void)opts;  // quadrature weights are geometry, not parameters
  const std::size_t L = ctx.x.rows;
  const int H = p.heads;
  const int hd = p.head_dim;
  const int K = table.width;
  const int D = p.dim;
  const double log_tau_max = std::log(kTauMax);

  if (gy.rows != L || gy.cols != static_cast<std::size_t>(D))
    throw ConfigError("attention_backward: gy shape mismatch");

  // Output projection.
  // gwo += concat^T gy ; gconcat = gy wo^T
  for (std::size_t r = 0; r < L; ++r) {
    const double* cr = ctx.concat.row(r);
    const double* gr = gy.row(r);
    for (int a = 0; a < D; ++a) {
      const double ca = cr[a];
      if (ca == 0.0) continue;
      double* grow = p.gwo.data() + static_cast<std::size_t>(a) * D;
      for (int b = 0; b < D; ++b) grow[b] += ca * gr[b];
    }
  }
  Matrix gconcat(L, static_cast<std::size_t>(D));
  for (std::size_t r = 0; r < L; ++r) {
    const double* gr = gy.row(r);
    double* out = gconcat.row(r);
    for (int a = 0; a < D; ++a) {
      const double* wrow = p.wo.data() + static_cast<std::size_t>(a) * D;
      double acc = 0.0;
      for (int b = 0; b < D; ++b) acc += gr[b] * wrow[b];
      out[a] = acc;
    }
  }

  Matrix gx(L, static_cast<std::size_t>(D));

  for (int h = 0; h < H; ++h) {
    const double tau = std::exp(std::min(p.s[h], log_tau_max));
    const bool tau_clamped = p.s[h] >= log_tau_max;

    Matrix gq(L, static_cast<std::size_t>(hd));
    Matrix gk(L, static_cast<std::size_t>(hd));
    Matrix gv(L, static_cast<std::size_t>(hd));

    for (std::size_t i = 0; i < L; ++i) {
      const double* ghy = gconcat.row(i) + static_cast<std::size_t>(h) * hd;

      // Attention weight gradients, then the softmax Jacobian.
      std::array<double, 16> ga{};
      double dot_ag = 0.0;
      for (int kk = 0; kk < K; ++kk) {
        if (!table.is_valid(i, kk)) continue;
        const double* vj =
            ctx.v[h].row(static_cast<std::size_t>(table.at(i, kk)));
        double acc = 0.0;
        for (int e = 0; e < hd; ++e) acc += ghy[e] * vj[e];
        ga[kk] = acc;
        dot_ag += ctx.attn[h].at(i, kk) * acc;
      }

      for (int kk = 0; kk < K; ++kk) {
        if (!table.is_valid(i, kk)) continue;
        const std::size_t j = static_cast<std::size_t>(table.at(i, kk));
        const double a = ctx.attn[h].at(i, kk);

        // Value path.
        double* gvj = gv.row(j);
        for (int e = 0; e < hd; ++e) gvj[e] += a * ghy[e];

        const double gl = a * (ga[kk] - dot_ag);
        if (gbias) (*gbias)[(i * K + kk) * H + h] += gl;
        if (!tau_clamped) p.gs[h] += gl * ctx.u[h].at(i, kk) * tau;

        const double gu = gl * tau;
        const double* kj = ctx.k[h].row(j);
        const double* qi = ctx.q[h].row(i);
        double* gqi = gq.row(i);
        double* gkj = gk.row(j);
        for (int e = 0; e < hd; ++e) {
          gqi[e] += gu * kj[e];
          gkj[e] += gu * qi[e];
        }
      }
    }

    Matrix gqraw(L, static_cast<std::size_t>(hd));
    Matrix gkraw(L, static_cast<std::size_t>(hd));
    row_normalize_backward(ctx.qraw[h], gq, gqraw);
    row_normalize_backward(ctx.kraw[h], gk, gkraw);

    // Projection weights and input gradient for this head.
    double* gwq = p.gwq.data() + static_cast<std::size_t>(h) * D * hd;
    double* gwk = p.gwk.data() + static_cast<std::size_t>(h) * D * hd;
    double* gwv = p.gwv.data() + static_cast<std::size_t>(h) * D * hd;
    const double* wq = p.head_w(p.wq, h);
    const double* wk = p.head_w(p.wk, h);
    const double* wv = p.head_w(p.wv, h);

    for (std::size_t r = 0; r < L; ++r) {
      const double* xr = ctx.x.row(r);
      const double* gq_r = gqraw.row(r);
      const double* gk_r = gkraw.row(r);
      const double* gv_r = gv.row(r);
      double* gx_r = gx.row(r);
      for (int d = 0; d < D; ++d) {
        const double xv = xr[d];
        double acc = 0.0;
        const double* wq_row = wq + static_cast<std::size_t>(d) * hd;
        const double* wk_row = wk + static_cast<std::size_t>(d) * hd;
        const double* wv_row = wv + static_cast<std::size_t>(d) * hd;
        double* gwq_row = gwq + static_cast<std::size_t>(d) * hd;
        double* gwk_row = gwk + static_cast<std::size_t>(d) * hd;
        double* gwv_row = gwv + static_cast<std::size_t>(d) * hd;
        for (int e = 0; e < hd; ++e) {
          gwq_row[e] += xv * gq_r[e];
          gwk_row[e] += xv * gk_r[e];
          gwv_row[e] += xv * gv_r[e];
          acc += gq_r[e] * wq_row[e] + gk_r[e] * wk_row[e] + gv_r[e] * wv_row[e];
        }
        gx_r[d] += acc;
      }
    }
  }
  return gx;
}

}  // namespace icoseg
