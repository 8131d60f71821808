#pragma once

// Dense layers with explicit forward contexts and hand-written backward
// passes. Everything is double precision; gradients accumulate into the
// layer's g* buffers so a multi-branch loss can sum contributions before an
// optimizer step.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "icoseg/attention.hpp"
#include "icoseg/common.hpp"
#include "icoseg/gauge_bias.hpp"
#include "icoseg/geometry.hpp"
#include "icoseg/rng.hpp"

namespace icoseg {

// Callback for enumerating named parameter tensors alongside their gradient
// buffers (used by the optimizer, checkpointing, and gradient checks).
using ParamVisitor = std::function<void(
    const std::string& name, const std::vector<std::uint64_t>& dims,
    std::vector<double>& value, std::vector<double>& grad)>;

struct Linear {
  int in = 0, out = 0;
  std::vector<double> w;  // in x out, row-major
  std::vector<double> b;  // out
  std::vector<double> gw, gb;

  static Linear init(int in, int out, RngState& rng);  // glorot W, zero b
  void zero_grad();
  Matrix forward(const Matrix& x) const;
  // gy: L x out. Accumulates gw/gb, returns gx.
  Matrix backward(const Matrix& x, const Matrix& gy);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct LayerNorm {
  int dim = 0;
  double eps = 1e-5;
  std::vector<double> gamma, beta;
  std::vector<double> ggamma, gbeta;

  struct Ctx {
    Matrix x;
    std::vector<double> mean, rstd;
  };

  static LayerNorm init(int dim);  // gamma = 1, beta = 0
  void zero_grad();
  Matrix forward(const Matrix& x, Ctx* ctx) const;
  Matrix backward(const Ctx& ctx, const Matrix& gy);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

// Exact-erf GELU applied elementwise.
double gelu(double x);
double gelu_grad(double x);

struct Mlp {
  Linear fc1, fc2;  // dim -> 2*dim -> dim

  struct Ctx {
    Matrix x, pre, act;
  };

  static Mlp init(int dim, RngState& rng);
  void zero_grad();
  Matrix forward(const Matrix& x, Ctx* ctx) const;
  Matrix backward(Ctx& ctx, const Matrix& gy);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct BlockOptions {
  bool gauge_bias = true;
  bool quadrature = true;
};

// Pre-norm residual block: x + Attn(LN(x)), then x + MLP(LN(x)). The
// attention logits take their geometric bias from the block's own Fourier
// table, evaluated against the rank's shared geometry cache/workspace.
struct TransformerBlock {
  LayerNorm ln1, ln2;
  AttentionParams attn;
  FourierBiasTable bias;
  std::vector<double> gbias_A, gbias_Bc;
  Mlp mlp;

  struct Ctx {
    LayerNorm::Ctx ln1c, ln2c;
    AttentionCtx attnc;
    Mlp::Ctx mlpc;
    std::vector<double> bias_values;  // nodes*width*heads, empty if unused
  };

  static TransformerBlock init(int dim, int heads, int order, int bins,
                               RngState& rng);
  void zero_grad();

  Matrix forward(const Matrix& x, const NeighborTable& table,
                 const GeodesicCache& cache, const BiasWorkspace& ws,
                 const std::vector<double>& omega, const BlockOptions& opts,
                 Ctx* ctx) const;
  Matrix backward(Ctx& ctx, const Matrix& gy, const NeighborTable& table,
                  const GeodesicCache& cache, const BiasWorkspace& ws,
                  const BlockOptions& opts);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

}  // namespace icoseg
