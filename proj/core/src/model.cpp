#include "icoseg/model.hpp"

#include <algorithm>
#include <cmath>

#include "icoseg/container.hpp"

namespace icoseg {

GeometryBundle GeometryBundle::build(const ModelConfig& cfg) {
  cfg.validate();
  GeometryBundle gb;
  gb.output_rank = cfg.output_rank;
  gb.token_rank = cfg.token_rank();
  gb.bottleneck_rank = cfg.bottleneck_rank();
  for (int r = gb.token_rank; r > gb.bottleneck_rank; --r)
    gb.enc_ranks.push_back(r);

  gb.output_mesh = build_icosphere(gb.output_rank);
  for (int r = gb.bottleneck_rank; r <= gb.token_rank; ++r) {
    RankGeometry rg;
    rg.mesh = build_icosphere(r);
    rg.table = build_neighbor_table(rg.mesh);
    rg.cache = build_geodesic_cache(rg.mesh, rg.table, cfg.anchors, cfg.bins);
    rg.ws = build_bias_workspace(rg.cache, cfg.fourier_order);
    gb.ranks.emplace(r, std::move(rg));
  }
  gb.out_tok = build_rank_transfer(gb.output_mesh, gb.ranks.at(gb.token_rank).mesh);
  for (int r : gb.enc_ranks)
    gb.down.emplace(r, build_rank_transfer(gb.ranks.at(r).mesh,
                                           gb.ranks.at(r - 1).mesh));
  return gb;
}

const RankGeometry& GeometryBundle::at(int rank) const {
  auto it = ranks.find(rank);
  if (it == ranks.end())
    throw ConfigError("geometry bundle missing rank " + std::to_string(rank));
  return it->second;
}

SegLossResult seg_loss(const Matrix& logits,
                       const std::vector<std::int32_t>& labels,
                       int num_classes) {
  if (logits.rows != labels.size())
    throw ConfigError("seg_loss: label count does not match logit rows");
  if (logits.cols != static_cast<std::size_t>(num_classes))
    throw ConfigError("seg_loss: logit width does not match class count");

  SegLossResult out;
  out.glogits = Matrix(logits.rows, logits.cols);

  std::size_t labeled = 0;
  for (std::int32_t y : labels) {
    if (y < 0 || y >= num_classes)
      throw DataError("seg_loss: label outside [0, num_classes)");
    if (y != 0) ++labeled;
  }
  if (labeled == 0) return out;  // value 0, defined false, zero grads
  out.defined = true;

  const double inv_n = 1.0 / static_cast<double>(labeled);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const std::int32_t y = labels[i];
    if (y == 0) continue;
    const double* l = logits.row(i);
    double m = l[0];
    for (int c = 1; c < num_classes; ++c) m = std::max(m, l[c]);
    double z = 0.0;
    for (int c = 0; c < num_classes; ++c) z += std::exp(l[c] - m);
    const double lse = m + std::log(z);
    total += lse - l[y];
    double* g = out.glogits.row(i);
    for (int c = 0; c < num_classes; ++c) {
      const double p = std::exp(l[c] - lse);
      g[c] = (p - (c == y ? 1.0 : 0.0)) * inv_n;
    }
  }
  out.value = total * inv_n;
  return out;
}

EqLossResult eq_loss_term(const Matrix& z_rot, const Matrix& z_tgt) {
  if (z_rot.rows != z_tgt.rows || z_rot.cols != z_tgt.cols)
    throw ConfigError("eq_loss_term: shape mismatch");
  EqLossResult out;
  out.g_zrot = Matrix(z_rot.rows, z_rot.cols);
  const double inv = 1.0 / static_cast<double>(z_rot.a.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z_rot.a.size(); ++i) {
    const double d = z_rot.a[i] - z_tgt.a[i];
    total += d * d;
    out.g_zrot.a[i] = 2.0 * d * inv;
  }
  out.value = total * inv;
  return out;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::int32_t>& idx) {
  Matrix out(idx.size(), x.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto j = static_cast<std::size_t>(idx[i]);
    if (j >= x.rows) throw DataError("gather_rows: index out of range");
    std::copy(x.row(j), x.row(j) + x.cols, out.row(i));
  }
  return out;
}

Matrix scatter_rows_add(const Matrix& g, const std::vector<std::int32_t>& idx,
                        std::size_t rows) {
  if (g.rows != idx.size()) throw ConfigError("scatter_rows_add: shape mismatch");
  Matrix out(rows, g.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto j = static_cast<std::size_t>(idx[i]);
    if (j >= rows) throw DataError("scatter_rows_add: index out of range");
    const double* gr = g.row(i);
    double* orow = out.row(j);
    for (std::size_t c = 0; c < g.cols; ++c) orow[c] += gr[c];
  }
  return out;
}

SphericalUNet SphericalUNet::init(const ModelConfig& cfg, RngState& rng) {
  cfg.validate();
  SphericalUNet m;
  m.cfg = cfg;
  m.embed = Linear::init(cfg.input_channels(), cfg.dim, rng);

  const int stages = cfg.effective_stages();
  for (int s = 0; s < stages; ++s) {
    std::vector<TransformerBlock> blocks;
    for (int b = 0; b < cfg.blocks_per_stage; ++b)
      blocks.push_back(TransformerBlock::init(cfg.dim, cfg.heads,
                                              cfg.fourier_order, cfg.bins, rng));
    m.enc.push_back(std::move(blocks));
  }
  for (int b = 0; b < cfg.blocks_per_stage; ++b)
    m.mid.push_back(TransformerBlock::init(cfg.dim, cfg.heads,
                                           cfg.fourier_order, cfg.bins, rng));
  for (int s = 0; s < stages; ++s) {
    m.fuse.push_back(Linear::init(2 * cfg.dim, cfg.dim, rng));
    std::vector<TransformerBlock> blocks;
    for (int b = 0; b < cfg.blocks_per_stage; ++b)
      blocks.push_back(TransformerBlock::init(cfg.dim, cfg.heads,
                                              cfg.fourier_order, cfg.bins, rng));
    m.dec.push_back(std::move(blocks));
  }
  m.head = Linear::init(cfg.dim, cfg.num_classes, rng);

  // Learned temperatures start at scale_init.
  auto set_scales = [&](std::vector<TransformerBlock>& blocks) {
    for (auto& b : blocks) b.attn.s.assign(b.attn.s.size(), cfg.scale_init);
  };
  for (auto& st : m.enc) set_scales(st);
  set_scales(m.mid);
  for (auto& st : m.dec) set_scales(st);
  return m;
}

SphericalUNet SphericalUNet::init_zeros(const ModelConfig& cfg) {
  RngState rng(0);
  SphericalUNet m = init(cfg, rng);
  m.visit_params([](const std::string&, const std::vector<std::uint64_t>&,
                    std::vector<double>& value, std::vector<double>&) {
    std::fill(value.begin(), value.end(), 0.0);
  });
  return m;
}

void SphericalUNet::zero_grad() {
  embed.zero_grad();
  for (auto& st : enc)
    for (auto& b : st) b.zero_grad();
  for (auto& b : mid) b.zero_grad();
  for (auto& f : fuse) f.zero_grad();
  for (auto& st : dec)
    for (auto& b : st) b.zero_grad();
  head.zero_grad();
}

void SphericalUNet::visit_params(const ParamVisitor& fn) {
  embed.visit("embed", fn);
  for (std::size_t s = 0; s < enc.size(); ++s)
    for (std::size_t b = 0; b < enc[s].size(); ++b)
      enc[s][b].visit("enc" + std::to_string(s) + ".blk" + std::to_string(b), fn);
  for (std::size_t b = 0; b < mid.size(); ++b)
    mid[b].visit("mid.blk" + std::to_string(b), fn);
  for (std::size_t s = 0; s < dec.size(); ++s) {
    fuse[s].visit("dec" + std::to_string(s) + ".fuse", fn);
    for (std::size_t b = 0; b < dec[s].size(); ++b)
      dec[s][b].visit("dec" + std::to_string(s) + ".blk" + std::to_string(b), fn);
  }
  head.visit("head", fn);
}

std::size_t SphericalUNet::param_count() {
  std::size_t n = 0;
  visit_params([&n](const std::string&, const std::vector<std::uint64_t>&,
                    std::vector<double>& value, std::vector<double>&) {
    n += value.size();
  });
  return n;
}

Matrix SphericalUNet::project_tokens(const Matrix& field,
                                     const GeometryBundle& gb,
                                     ProjCtx* ctx) const {
  if (field.rows != gb.output_mesh.vertex_count())
    throw ConfigError("project_tokens: field rows do not match output mesh");
  if (field.cols != 3)
    throw ConfigError("project_tokens: expected 3 input channels");
  if (field.has_non_finite())
    throw DataError("project_tokens: field has non-finite values");

  Matrix raw = downsample(gb.out_tok, field, gb.output_mesh.area_weights,
                          cfg.geo_sampling);
  if (cfg.abs_lat_pe) {
    const IcosphereMesh& tok = gb.at(gb.token_rank).mesh;
    Matrix with_pe(raw.rows, raw.cols + 2);
    for (std::size_t i = 0; i < raw.rows; ++i) {
      std::copy(raw.row(i), raw.row(i) + raw.cols, with_pe.row(i));
      const double z = std::clamp(tok.vertices[i][2], -1.0, 1.0);
      const double lat = std::asin(z);
      with_pe.at(i, raw.cols) = std::sin(lat);
      with_pe.at(i, raw.cols + 1) = std::cos(lat);
    }
    raw = std::move(with_pe);
  }
  Matrix tokens = embed.forward(raw);
  if (ctx) ctx->raw = std::move(raw);
  return tokens;
}

void SphericalUNet::project_backward(ProjCtx& ctx, const Matrix& gtokens) {
  embed.backward(ctx.raw, gtokens);  // input gradient unused (data is fixed)
}

Matrix SphericalUNet::forward(const Matrix& tokens, const GeometryBundle& gb,
                              Trace* trace) const {
  if (tokens.rows != gb.at(gb.token_rank).mesh.vertex_count())
    throw ConfigError("forward: token rows do not match token mesh");
  if (tokens.cols != static_cast<std::size_t>(cfg.dim))
    throw ConfigError("forward: token width does not match dim");

  const BlockOptions opts = block_options();
  const std::size_t stages = enc.size();

  if (trace) {
    trace->enc_ctx.assign(stages, {});
    trace->dec_ctx.assign(stages, {});
    trace->mid_ctx.clear();
    trace->fuse_in.assign(stages, Matrix());
  }

  Matrix x = tokens;
  std::vector<Matrix> skips(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    const int r = gb.enc_ranks[s];
    const RankGeometry& rg = gb.at(r);
    if (trace) trace->enc_ctx[s].resize(enc[s].size());
    for (std::size_t b = 0; b < enc[s].size(); ++b)
      x = enc[s][b].forward(x, rg.table, rg.cache, rg.ws,
                            rg.mesh.area_weights, opts,
                            trace ? &trace->enc_ctx[s][b] : nullptr);
    skips[s] = x;
    x = downsample(gb.down.at(r), x, rg.mesh.area_weights, cfg.geo_sampling);
  }

  {
    const RankGeometry& rg = gb.at(gb.bottleneck_rank);
    if (trace) trace->mid_ctx.resize(mid.size());
    for (std::size_t b = 0; b < mid.size(); ++b)
      x = mid[b].forward(x, rg.table, rg.cache, rg.ws, rg.mesh.area_weights,
                         opts, trace ? &trace->mid_ctx[b] : nullptr);
  }

  for (std::size_t s = stages; s-- > 0;) {
    const int r = gb.enc_ranks[s];
    const RankGeometry& rg = gb.at(r);
    Matrix up = upsample(gb.down.at(r), x, cfg.geo_sampling);

    Matrix cat(up.rows, up.cols + skips[s].cols);
    for (std::size_t i = 0; i < up.rows; ++i) {
      std::copy(up.row(i), up.row(i) + up.cols, cat.row(i));
      std::copy(skips[s].row(i), skips[s].row(i) + skips[s].cols,
                cat.row(i) + up.cols);
    }
    x = fuse[s].forward(cat);
    if (trace) {
      trace->fuse_in[s] = std::move(cat);
      trace->dec_ctx[s].resize(dec[s].size());
    }
    for (std::size_t b = 0; b < dec[s].size(); ++b)
      x = dec[s][b].forward(x, rg.table, rg.cache, rg.ws,
                            rg.mesh.area_weights, opts,
                            trace ? &trace->dec_ctx[s][b] : nullptr);
  }

  if (trace) trace->head_in = x;
  Matrix z_tok = head.forward(x);
  return upsample(gb.out_tok, z_tok, cfg.geo_sampling);
}

Matrix SphericalUNet::backward(Trace& trace, const Matrix& glogits,
                               const GeometryBundle& gb) {
  const BlockOptions opts = block_options();
  const std::size_t stages = enc.size();

  Matrix gz_tok = upsample_backward(gb.out_tok, glogits, cfg.geo_sampling);
  Matrix g = head.backward(trace.head_in, gz_tok);

  std::vector<Matrix> skip_grad(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    const int r = gb.enc_ranks[s];
    const RankGeometry& rg = gb.at(r);
    for (std::size_t b = dec[s].size(); b-- > 0;)
      g = dec[s][b].backward(trace.dec_ctx[s][b], g, rg.table, rg.cache, rg.ws,
                             opts);
    Matrix gcat = fuse[s].backward(trace.fuse_in[s], g);
    Matrix gup(gcat.rows, static_cast<std::size_t>(cfg.dim));
    skip_grad[s] = Matrix(gcat.rows, static_cast<std::size_t>(cfg.dim));
    for (std::size_t i = 0; i < gcat.rows; ++i) {
      std::copy(gcat.row(i), gcat.row(i) + cfg.dim, gup.row(i));
      std::copy(gcat.row(i) + cfg.dim, gcat.row(i) + 2 * cfg.dim,
                skip_grad[s].row(i));
    }
    g = upsample_backward(gb.down.at(r), gup, cfg.geo_sampling);
  }

  {
    const RankGeometry& rg = gb.at(gb.bottleneck_rank);
    for (std::size_t b = mid.size(); b-- > 0;)
      g = mid[b].backward(trace.mid_ctx[b], g, rg.table, rg.cache, rg.ws, opts);
  }

  for (std::size_t s = stages; s-- > 0;) {
    const int r = gb.enc_ranks[s];
    const RankGeometry& rg = gb.at(r);
    g = downsample_backward(gb.down.at(r), g, rg.mesh.area_weights,
                            cfg.geo_sampling);
    for (std::size_t i = 0; i < g.a.size(); ++i) g.a[i] += skip_grad[s].a[i];
    for (std::size_t b = enc[s].size(); b-- > 0;)
      g = enc[s][b].backward(trace.enc_ctx[s][b], g, rg.table, rg.cache, rg.ws,
                             opts);
  }
  return g;
}

void save_checkpoint(const std::string& path, SphericalUNet& model,
                     const Config& config,
                     const std::map<std::string, std::string>& extra_meta) {
  Container c;
  c.kind = "checkpoint";
  c.meta = extra_meta;
  c.add_text("config", config_to_text(config));
  model.visit_params([&c](const std::string& name,
                          const std::vector<std::uint64_t>& dims,
                          std::vector<double>& value, std::vector<double>&) {
    c.add_f64("param/" + name, dims, value.data());
  });
  write_container(path, c);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  const Container c = read_container(path, "checkpoint");
  LoadedCheckpoint out{parse_config_text(c.get_text("config")),
                       SphericalUNet(), c.meta};
  out.model = SphericalUNet::init_zeros(out.config.model);
  out.model.visit_params([&c](const std::string& name,
                              const std::vector<std::uint64_t>&,
                              std::vector<double>& value,
                              std::vector<double>&) {
    const auto stored = c.get_f64("param/" + name);
    if (stored.size() != value.size())
      throw DataError("checkpoint parameter '" + name + "' has wrong size");
    value = stored;
  });
  return out;
}

}  // namespace icoseg
