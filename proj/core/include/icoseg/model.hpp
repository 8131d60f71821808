#pragma once

// U-shaped transformer over icosphere ranks. Full-resolution fields live at
// output_rank; the backbone runs one rank below (the token rank) and coarser.
// Each encoder stage applies transformer blocks at its rank and pools to the
// next rank down; the decoder mirrors this with upsampling and skip fusion.
// A linear head produces per-class logits at the token rank, which are
// upsampled back to output_rank for the loss and metrics.
//
// Every learnable tensor is reachable through visit_params, which is what
// the optimizer, checkpoint writer, and finite-difference checks iterate.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "icoseg/common.hpp"
#include "icoseg/config.hpp"
#include "icoseg/gauge_bias.hpp"
#include "icoseg/geometry.hpp"
#include "icoseg/icosphere.hpp"
#include "icoseg/nn.hpp"
#include "icoseg/rank_transfer.hpp"
#include "icoseg/rng.hpp"

namespace icoseg {

struct RankGeometry {
  IcosphereMesh mesh;
  NeighborTable table;
  GeodesicCache cache;
  BiasWorkspace ws;
};

// All geometry a model of a given configuration needs, built once.
struct GeometryBundle {
  int output_rank = 0, token_rank = 0, bottleneck_rank = 0;
  std::vector<int> enc_ranks;  // token_rank descending to bottleneck_rank+1

  IcosphereMesh output_mesh;
  std::map<int, RankGeometry> ranks;      // bottleneck..token inclusive
  RankTransfer out_tok;                   // output_rank -> token_rank
  std::map<int, RankTransfer> down;       // fine rank r -> r-1

  static GeometryBundle build(const ModelConfig& cfg);
  const RankGeometry& at(int rank) const;
};

// Mean cross-entropy over nodes with label != 0. When no node is labeled
// the loss is 0 with defined = false and a zero gradient.
struct SegLossResult {
  double value = 0.0;
  bool defined = false;
  Matrix glogits;
};
SegLossResult seg_loss(const Matrix& logits,
                       const std::vector<std::int32_t>& labels,
                       int num_classes);

// Mean squared difference normalized by rows*cols; grad is w.r.t. z_rot
// only (the target is held fixed).
struct EqLossResult {
  double value = 0.0;
  Matrix g_zrot;
};
EqLossResult eq_loss_term(const Matrix& z_rot, const Matrix& z_tgt);

Matrix gather_rows(const Matrix& x, const std::vector<std::int32_t>& idx);
// Transpose of gather_rows: out[idx[i]] += g[i], out has `rows` rows.
Matrix scatter_rows_add(const Matrix& g, const std::vector<std::int32_t>& idx,
                        std::size_t rows);

struct SphericalUNet {
  ModelConfig cfg;
  Linear embed;  // input_channels -> dim
  std::vector<std::vector<TransformerBlock>> enc;  // per encoder stage
  std::vector<TransformerBlock> mid;               // bottleneck blocks
  std::vector<Linear> fuse;                        // per decoder stage, 2*dim -> dim
  std::vector<std::vector<TransformerBlock>> dec;
  Linear head;  // dim -> num_classes

  static SphericalUNet init(const ModelConfig& cfg, RngState& rng);
  static SphericalUNet init_zeros(const ModelConfig& cfg);
  void zero_grad();
  void visit_params(const ParamVisitor& fn);
  std::size_t param_count();

  struct ProjCtx {
    Matrix raw;  // embed input at the token rank
  };
  // field: output-rank nodes x 3 channels -> token-rank tokens (dim wide).
  // Appends sin/cos latitude columns before the embedding when abs_lat_pe.
  Matrix project_tokens(const Matrix& field, const GeometryBundle& gb,
                        ProjCtx* ctx) const;
  void project_backward(ProjCtx& ctx, const Matrix& gtokens);

  struct Trace {
    std::vector<std::vector<TransformerBlock::Ctx>> enc_ctx, dec_ctx;
    std::vector<TransformerBlock::Ctx> mid_ctx;
    std::vector<Matrix> fuse_in;  // decoder concat inputs
    Matrix head_in;               // token-rank features before the head
  };
  // tokens: token-rank nodes x dim -> logits at output rank.
  Matrix forward(const Matrix& tokens, const GeometryBundle& gb,
                 Trace* trace) const;
  // Accumulates parameter gradients, returns d(loss)/d(tokens).
  Matrix backward(Trace& trace, const Matrix& glogits,
                  const GeometryBundle& gb);

  BlockOptions block_options() const {
    return BlockOptions{cfg.gauge_bias, cfg.quadrature_attn};
  }
};

// Checkpoints carry the full config text, the parameter tensors, and
// whatever extra meta the caller provides (epoch counters, rng state).
void save_checkpoint(const std::string& path, SphericalUNet& model,
                     const Config& config,
                     const std::map<std::string, std::string>& extra_meta = {});
struct LoadedCheckpoint {
  Config config;
  SphericalUNet model;
  std::map<std::string, std::string> meta;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace icoseg
