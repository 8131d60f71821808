#include "icoseg/nn.hpp"

#include <cmath>

namespace icoseg {

Linear Linear::init(int in, int out, RngState& rng) {
  if (in < 1 || out < 1) throw ConfigError("linear layer needs positive dims");
  Linear l;
  l.in = in;
  l.out = out;
  l.w.resize(static_cast<std::size_t>(in) * out);
  glorot_fill(l.w, in, out, rng);
  l.b.assign(out, 0.0);
  l.zero_grad();
  return l;
}

void Linear::zero_grad() {
  gw.assign(w.size(), 0.0);
  gb.assign(b.size(), 0.0);
}

Matrix Linear::forward(const Matrix& x) const {
  if (x.cols != static_cast<std::size_t>(in))
    throw ConfigError("linear forward: input width mismatch");
  Matrix y = matmul(x, w, static_cast<std::size_t>(out));
  for (std::size_t r = 0; r < y.rows; ++r) {
    double* yr = y.row(r);
    for (int c = 0; c < out; ++c) yr[c] += b[c];
  }
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& gy) {
  if (gy.rows != x.rows || gy.cols != static_cast<std::size_t>(out))
    throw ConfigError("linear backward: gy shape mismatch");
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    const double* gr = gy.row(r);
    for (int c = 0; c < out; ++c) gb[c] += gr[c];
    for (int i = 0; i < in; ++i) {
      const double xv = xr[i];
      if (xv == 0.0) continue;
      double* grow = gw.data() + static_cast<std::size_t>(i) * out;
      for (int c = 0; c < out; ++c) grow[c] += xv * gr[c];
    }
  }
  Matrix gx(x.rows, static_cast<std::size_t>(in));
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* gr = gy.row(r);
    double* out_r = gx.row(r);
    for (int i = 0; i < in; ++i) {
      const double* wrow = w.data() + static_cast<std::size_t>(i) * out;
      double acc = 0.0;
      for (int c = 0; c < out; ++c) acc += gr[c] * wrow[c];
      out_r[i] = acc;
    }
  }
  return gx;
}

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", {static_cast<std::uint64_t>(in), static_cast<std::uint64_t>(out)}, w, gw);
  fn(prefix + ".b", {static_cast<std::uint64_t>(out)}, b, gb);
}

LayerNorm LayerNorm::init(int dim) {
  if (dim < 1) throw ConfigError("layer norm needs positive dim");
  LayerNorm ln;
  ln.dim = dim;
  ln.gamma.assign(dim, 1.0);
  ln.beta.assign(dim, 0.0);
  ln.zero_grad();
  return ln;
}

void LayerNorm::zero_grad() {
  ggamma.assign(gamma.size(), 0.0);
  gbeta.assign(beta.size(), 0.0);
}

Matrix LayerNorm::forward(const Matrix& x, Ctx* ctx) const {
  if (x.cols != static_cast<std::size_t>(dim))
    throw ConfigError("layer norm: input width mismatch");
  Matrix y(x.rows, x.cols);
  std::vector<double> mean(x.rows), rstd(x.rows);
  const double n = static_cast<double>(dim);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double mu = 0.0;
    for (int c = 0; c < dim; ++c) mu += xr[c];
    mu /= n;
    double var = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double d = xr[c] - mu;
      var += d * d;
    }
    var /= n;
    const double rs = 1.0 / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    double* yr = y.row(r);
    for (int c = 0; c < dim; ++c)
      yr[c] = gamma[c] * ((xr[c] - mu) * rs) + beta[c];
  }
  if (ctx) {
    ctx->x = x;
    ctx->mean = std::move(mean);
    ctx->rstd = std::move(rstd);
  }
  return y;
}

Matrix LayerNorm::backward(const Ctx& ctx, const Matrix& gy) {
  const Matrix& x = ctx.x;
  if (gy.rows != x.rows || gy.cols != static_cast<std::size_t>(dim))
    throw ConfigError("layer norm backward: gy shape mismatch");
  Matrix gx(x.rows, x.cols);
  const double n = static_cast<double>(dim);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    const double* gr = gy.row(r);
    const double mu = ctx.mean[r];
    const double rs = ctx.rstd[r];
    double sum_gxhat = 0.0, sum_gxhat_xhat = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double xhat = (xr[c] - mu) * rs;
      const double gxhat = gr[c] * gamma[c];
      sum_gxhat += gxhat;
      sum_gxhat_xhat += gxhat * xhat;
      ggamma[c] += gr[c] * xhat;
      gbeta[c] += gr[c];
    }
    double* out = gx.row(r);
    for (int c = 0; c < dim; ++c) {
      const double xhat = (xr[c] - mu) * rs;
      const double gxhat = gr[c] * gamma[c];
      out[c] = rs * (gxhat - sum_gxhat / n - xhat * sum_gxhat_xhat / n);
    }
  }
  return gx;
}

void LayerNorm::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".gamma", {static_cast<std::uint64_t>(dim)}, gamma, ggamma);
  fn(prefix + ".beta", {static_cast<std::uint64_t>(dim)}, beta, gbeta);
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double gelu_grad(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343819;
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) +
         x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

Mlp Mlp::init(int dim, RngState& rng) {
  Mlp m;
  m.fc1 = Linear::init(dim, 2 * dim, rng);
  m.fc2 = Linear::init(2 * dim, dim, rng);
  return m;
}

void Mlp::zero_grad() {
  fc1.zero_grad();
  fc2.zero_grad();
}

Matrix Mlp::forward(const Matrix& x, Ctx* ctx) const {
  Matrix pre = fc1.forward(x);
  Matrix act(pre.rows, pre.cols);
  for (std::size_t i = 0; i < pre.a.size(); ++i) act.a[i] = gelu(pre.a[i]);
  Matrix y = fc2.forward(act);
  if (ctx) {
    ctx->x = x;
    ctx->pre = std::move(pre);
    ctx->act = std::move(act);
  }
  return y;
}

Matrix Mlp::backward(Ctx& ctx, const Matrix& gy) {
  Matrix gact = fc2.backward(ctx.act, gy);
  Matrix gpre(gact.rows, gact.cols);
  for (std::size_t i = 0; i < gact.a.size(); ++i)
    gpre.a[i] = gact.a[i] * gelu_grad(ctx.pre.a[i]);
  return fc1.backward(ctx.x, gpre);
}

void Mlp::visit(const std::string& prefix, const ParamVisitor& fn) {
  fc1.visit(prefix + ".fc1", fn);
  fc2.visit(prefix + ".fc2", fn);
}

TransformerBlock TransformerBlock::init(int dim, int heads, int order,
                                        int bins, RngState& rng) {
  TransformerBlock b;
  b.ln1 = LayerNorm::init(dim);
  b.ln2 = LayerNorm::init(dim);
  b.attn = AttentionParams::init(heads, dim, rng);
  b.bias = FourierBiasTable::zeros(heads, order, bins);
  b.mlp = Mlp::init(dim, rng);
  b.zero_grad();
  return b;
}

void TransformerBlock::zero_grad() {
  ln1.zero_grad();
  ln2.zero_grad();
  attn.zero_grad();
  mlp.zero_grad();
  gbias_A.assign(bias.A.size(), 0.0);
  gbias_Bc.assign(bias.Bc.size(), 0.0);
}

Matrix TransformerBlock::forward(const Matrix& x, const NeighborTable& table,
                                 const GeodesicCache& cache,
                                 const BiasWorkspace& ws,
                                 const std::vector<double>& omega,
                                 const BlockOptions& opts, Ctx* ctx) const {
  LayerNorm::Ctx ln1c;
  Matrix h1 = ln1.forward(x, ctx ? &ln1c : nullptr);

  std::vector<double> bias_values;
  const std::vector<double>* bias_ptr = nullptr;
  if (opts.gauge_bias) {
    bias_values = eval_bias(bias, cache, ws);
    bias_ptr = &bias_values;
  }

  AttentionOptions aopts;
  aopts.use_quadrature = opts.quadrature;
  AttentionCtx attnc;
  Matrix a = attention_forward(h1, attn, table, bias_ptr, omega, aopts,
                               ctx ? &attnc : nullptr);
  Matrix x2 = x + a;

  LayerNorm::Ctx ln2c;
  Matrix h2 = ln2.forward(x2, ctx ? &ln2c : nullptr);
  Mlp::Ctx mlpc;
  Matrix m = mlp.forward(h2, ctx ? &mlpc : nullptr);
  Matrix y = x2 + m;

  if (ctx) {
    ctx->ln1c = std::move(ln1c);
    ctx->ln2c = std::move(ln2c);
    ctx->attnc = std::move(attnc);
    ctx->mlpc = std::move(mlpc);
    ctx->bias_values = std::move(bias_values);
  }
  return y;
}

Matrix TransformerBlock::backward(Ctx& ctx, const Matrix& gy,
                                  const NeighborTable& table,
                                  const GeodesicCache& cache,
                                  const BiasWorkspace& ws,
                                  const BlockOptions& opts) {
  // y = x2 + mlp(ln2(x2))
  Matrix gh2 = mlp.backward(ctx.mlpc, gy);
  Matrix gx2 = ln2.backward(ctx.ln2c, gh2);
  for (std::size_t i = 0; i < gx2.a.size(); ++i) gx2.a[i] += gy.a[i];

  // x2 = x + attn(ln1(x))
  AttentionOptions aopts;
  aopts.use_quadrature = opts.quadrature;
  std::vector<double> gbias_values;
  std::vector<double>* gbias_ptr = nullptr;
  if (opts.gauge_bias) {
    gbias_values.assign(ctx.bias_values.size(), 0.0);
    gbias_ptr = &gbias_values;
  }
  Matrix gh1 = attention_backward(attn, ctx.attnc, table, gx2, aopts, gbias_ptr);
  if (opts.gauge_bias)
    bias_backward(bias, cache, ws, gbias_values, gbias_A, gbias_Bc);

  Matrix gx = ln1.backward(ctx.ln1c, gh1);
  for (std::size_t i = 0; i < gx.a.size(); ++i) gx.a[i] += gx2.a[i];
  return gx;
}

void TransformerBlock::visit(const std::string& prefix, const ParamVisitor& fn) {
  ln1.visit(prefix + ".ln1", fn);
  const auto n_per_head = static_cast<std::uint64_t>(attn.dim) * attn.head_dim;
  fn(prefix + ".attn.wq", {static_cast<std::uint64_t>(attn.heads), n_per_head}, attn.wq, attn.gwq);
  fn(prefix + ".attn.wk", {static_cast<std::uint64_t>(attn.heads), n_per_head}, attn.wk, attn.gwk);
  fn(prefix + ".attn.wv", {static_cast<std::uint64_t>(attn.heads), n_per_head}, attn.wv, attn.gwv);
  fn(prefix + ".attn.wo", {static_cast<std::uint64_t>(attn.dim), static_cast<std::uint64_t>(attn.dim)}, attn.wo, attn.gwo);
  fn(prefix + ".attn.s", {static_cast<std::uint64_t>(attn.heads)}, attn.s, attn.gs);
  fn(prefix + ".bias.A",
     {static_cast<std::uint64_t>(bias.heads), static_cast<std::uint64_t>(bias.order + 1), static_cast<std::uint64_t>(bias.bins)},
     bias.A, gbias_A);
  fn(prefix + ".bias.Bc",
     {static_cast<std::uint64_t>(bias.heads), static_cast<std::uint64_t>(bias.order + 1), static_cast<std::uint64_t>(bias.bins)},
     bias.Bc, gbias_Bc);
  ln2.visit(prefix + ".ln2", fn);
  mlp.visit(prefix + ".mlp", fn);
}

}  // namespace icoseg
