// Microbenchmarks for the hot paths: geometry construction, bias pooling,
// attention, resampling, rotation maps, and the end-to-end forward pass.

#include <benchmark/benchmark.h>

#include <memory>

#include "icoseg/attention.hpp"
#include "icoseg/dataset.hpp"
#include "icoseg/gauge_bias.hpp"
#include "icoseg/geometry.hpp"
#include "icoseg/icosphere.hpp"
#include "icoseg/model.hpp"
#include "icoseg/rank_transfer.hpp"
#include "icoseg/rng.hpp"
#include "icoseg/so3.hpp"

namespace {

using namespace icoseg;

// Shared geometry per rank, built once per process.
struct RankFixture {
  IcosphereMesh mesh;
  NeighborTable table;
  GeodesicCache cache;
  BiasWorkspace ws;

  explicit RankFixture(int rank)
      : mesh(build_icosphere(rank)),
        table(build_neighbor_table(mesh)),
        cache(build_geodesic_cache(mesh, table)),
        ws(build_bias_workspace(cache, 6)) {}
};

const RankFixture& fixture(int rank) {
  static std::map<int, std::unique_ptr<RankFixture>> cache_by_rank;
  auto& slot = cache_by_rank[rank];
  if (!slot) slot = std::make_unique<RankFixture>(rank);
  return *slot;
}

void BM_MeshBuild(benchmark::State& state) {
  const int rank = static_cast<int>(state.range(0));
  for (auto _ : state) {
    IcosphereMesh mesh = build_icosphere(rank);
    benchmark::DoNotOptimize(mesh.vertices.data());
  }
}
BENCHMARK(BM_MeshBuild)->Arg(3)->Arg(4)->Arg(5);

void BM_GeodesicCacheBuild(benchmark::State& state) {
  const int rank = static_cast<int>(state.range(0));
  const IcosphereMesh mesh = build_icosphere(rank);
  const NeighborTable table = build_neighbor_table(mesh);
  for (auto _ : state) {
    GeodesicCache cache = build_geodesic_cache(mesh, table);
    benchmark::DoNotOptimize(cache.delta.data());
  }
}
BENCHMARK(BM_GeodesicCacheBuild)->Arg(3)->Arg(4);

void BM_BiasEval(benchmark::State& state) {
  const RankFixture& fx = fixture(static_cast<int>(state.range(0)));
  RngState rng(7);
  FourierBiasTable t = FourierBiasTable::zeros(4, 6, kDefaultBins);
  for (auto& v : t.A) v = rng.uniform(-0.5, 0.5);
  for (auto& v : t.Bc) v = rng.uniform(-0.5, 0.5);
  for (auto _ : state) {
    std::vector<double> bias = eval_bias(t, fx.cache, fx.ws);
    benchmark::DoNotOptimize(bias.data());
  }
}
BENCHMARK(BM_BiasEval)->Arg(3)->Arg(4);

void BM_AttentionForward(benchmark::State& state) {
  const RankFixture& fx = fixture(static_cast<int>(state.range(0)));
  const int dim = 32;
  RngState rng(11);
  AttentionParams p = AttentionParams::init(4, dim, rng);
  Matrix x(fx.mesh.vertex_count(), dim);
  for (auto& v : x.a) v = rng.normal();
  AttentionOptions opts;
  opts.use_quadrature = true;
  for (auto _ : state) {
    Matrix y = attention_forward(x, p, fx.table, nullptr,
                                 fx.mesh.area_weights, opts, nullptr);
    benchmark::DoNotOptimize(y.a.data());
  }
}
BENCHMARK(BM_AttentionForward)->Arg(3)->Arg(4);

void BM_AttentionBackward(benchmark::State& state) {
  const RankFixture& fx = fixture(static_cast<int>(state.range(0)));
  const int dim = 32;
  RngState rng(13);
  AttentionParams p = AttentionParams::init(4, dim, rng);
  Matrix x(fx.mesh.vertex_count(), dim);
  Matrix gy(fx.mesh.vertex_count(), dim);
  for (auto& v : x.a) v = rng.normal();
  for (auto& v : gy.a) v = rng.normal();
  AttentionOptions opts;
  opts.use_quadrature = true;
  AttentionCtx ctx;
  attention_forward(x, p, fx.table, nullptr, fx.mesh.area_weights, opts, &ctx);
  for (auto _ : state) {
    p.zero_grad();
    Matrix gx = attention_backward(p, ctx, fx.table, gy, opts, nullptr);
    benchmark::DoNotOptimize(gx.a.data());
  }
}
BENCHMARK(BM_AttentionBackward)->Arg(3)->Arg(4);

void BM_RotationMaps(benchmark::State& state) {
  const int rank = static_cast<int>(state.range(0));
  const IcosphereMesh token = build_icosphere(rank - 1);
  const IcosphereMesh output = build_icosphere(rank);
  RngState rng(17);
  const Rotation r = sample_rotation_uniform(rng);
  for (auto _ : state) {
    RotationMapSet maps = build_rotation_maps(r, token, output);
    benchmark::DoNotOptimize(maps.idx_img.data());
  }
}
BENCHMARK(BM_RotationMaps)->Arg(3)->Arg(4);

void BM_Upsample(benchmark::State& state) {
  const int rank = static_cast<int>(state.range(0));
  const IcosphereMesh fine = build_icosphere(rank);
  const IcosphereMesh coarse = build_icosphere(rank - 1);
  const RankTransfer t = build_rank_transfer(fine, coarse, 0.0);
  RngState rng(19);
  Matrix y(coarse.vertex_count(), 32);
  for (auto& v : y.a) v = rng.normal();
  for (auto _ : state) {
    Matrix up = upsample(t, y, true);
    benchmark::DoNotOptimize(up.a.data());
  }
}
BENCHMARK(BM_Upsample)->Arg(3)->Arg(4);

void BM_ModelForward(benchmark::State& state) {
  const int rank = static_cast<int>(state.range(0));
  ModelConfig cfg;
  cfg.output_rank = rank;
  cfg.validate();
  const GeometryBundle gb = GeometryBundle::build(cfg);
  RngState rng(23);
  SphericalUNet model = SphericalUNet::init(cfg, rng);
  const IcosphereMesh mesh = build_icosphere(rank);
  const auto data = make_synthetic_dataset(mesh, 1, 29);
  const Matrix tokens = model.project_tokens(data[0].features, gb, nullptr);
  for (auto _ : state) {
    Matrix logits = model.forward(tokens, gb, nullptr);
    benchmark::DoNotOptimize(logits.a.data());
  }
}
BENCHMARK(BM_ModelForward)->Arg(3)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
