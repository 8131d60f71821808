// Command-line front end. Every subcommand is a thin wrapper over the core
// library; all heavy lifting and all validation live there. Exit codes:
// 0 success, 1 property/check failure, 2 configuration error, 3 data error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "icoseg/config.hpp"
#include "icoseg/container.hpp"
#include "icoseg/dataset.hpp"
#include "icoseg/geometry.hpp"
#include "icoseg/icosphere.hpp"
#include "icoseg/model.hpp"
#include "icoseg/rank_transfer.hpp"
#include "icoseg/render.hpp"
#include "icoseg/selfcheck.hpp"
#include "icoseg/so3.hpp"
#include "icoseg/stress.hpp"
#include "icoseg/train.hpp"

namespace {

using namespace icoseg;

int g_exit_code = 0;

// ---------------------------------------------------------------- mesh ----

struct MeshOpts {
  int rank = 3;
  std::string out;
};

void run_mesh(const MeshOpts& o) {
  const IcosphereMesh mesh = build_icosphere(o.rank);
  write_mesh(o.out, mesh);
  std::cout << "mesh rank " << o.rank << ": " << mesh.vertex_count()
            << " nodes, " << mesh.edge_count() << " edges, "
            << mesh.face_count() << " faces -> " << o.out << "\n";
}

// -------------------------------------------------------------- tables ----

struct TablesOpts {
  std::string mesh;
  int anchors = kDefaultAnchors;
  int bins = kDefaultBins;
  std::string out;
  std::string coarse_mesh;
  std::string transfer_out;
  double sigma = 0.0;
};

void run_tables(const TablesOpts& o) {
  if (o.coarse_mesh.empty() != o.transfer_out.empty())
    throw ConfigError(
        "--coarse-mesh and --transfer-out must be given together");
  const IcosphereMesh mesh = read_mesh(o.mesh);
  const NeighborTable table = build_neighbor_table(mesh);
  const GeodesicCache cache =
      build_geodesic_cache(mesh, table, o.anchors, o.bins);
  write_geodesic_cache(o.out, cache);
  std::cout << "geometry cache rank " << mesh.rank << " (" << o.anchors
            << " anchors, " << o.bins << " bins) -> " << o.out << "\n";

  if (!o.coarse_mesh.empty()) {
    const IcosphereMesh coarse = read_mesh(o.coarse_mesh);
    const RankTransfer t = build_rank_transfer(mesh, coarse, o.sigma);
    write_rank_transfer(o.transfer_out, t);
    std::cout << "rank transfer " << t.fine_rank << " -> " << t.coarse_rank
              << " (sigma " << t.sigma << ") -> " << o.transfer_out << "\n";
  }
}

// -------------------------------------------------------------- rotmap ----

struct RotmapOpts {
  std::string mesh_token;
  std::string mesh_out;
  std::uint64_t seed = 1;
  std::string mode = "uniform";
  int count = 1;
  std::string out;
};

void run_rotmap(const RotmapOpts& o) {
  if (o.count < 1) throw ConfigError("rotmap count must be >= 1");
  const IcosphereMesh token_mesh = read_mesh(o.mesh_token);
  const IcosphereMesh output_mesh = read_mesh(o.mesh_out);
  RngState rng(o.seed);
  for (int k = 0; k < o.count; ++k) {
    Rotation r;
    if (o.mode == "capped35") {
      r = sample_rotation_capped(kDefaultPoseCap, rng);
    } else if (o.mode == "uniform") {
      r = sample_rotation_uniform(rng);
    } else if (o.mode == "zyx") {
      r = sample_rotation_zyx(2.0 * kPi, kPi, 2.0 * kPi, rng);
    } else {
      throw ConfigError("rotmap mode must be capped35, uniform, or zyx");
    }
    const RotationMapSet maps = build_rotation_maps(r, token_mesh, output_mesh);
    const std::string path =
        o.count == 1 ? o.out : o.out + "." + std::to_string(k + 1);
    write_rotation_maps(path, maps);
    std::cout << "rotation map " << (k + 1) << "/" << o.count << " ("
              << o.mode << ", angle " << r.angle() * 180.0 / kPi
              << " deg) -> " << path << "\n";
  }
}

// ------------------------------------------------------------ gen-data ----

struct GenDataOpts {
  int rank = 3;
  int count = 8;
  std::uint64_t seed = 1234;
  double ignore_fraction = SynthParams{}.ignore_fraction;
  double pose_cap_deg = 0.0;
  std::string out;
  std::string poses_out;
};

void run_gen_data(const GenDataOpts& o) {
  const IcosphereMesh mesh = build_icosphere(o.rank);
  SynthParams params;
  params.ignore_fraction = o.ignore_fraction;
  std::vector<SegSample> samples =
      make_synthetic_dataset(mesh, o.count, o.seed, params);

  if (o.pose_cap_deg > 0.0) {
    RngState prng(o.seed ^ 0x706f7365ULL);  // independent perturbation stream
    const std::vector<Rotation> poses = pose_perturb_dataset(
        samples, mesh, o.pose_cap_deg * kPi / 180.0, prng);
    if (!o.poses_out.empty()) {
      nlohmann::json arr = nlohmann::json::array();
      for (const Rotation& r : poses) {
        nlohmann::json e;
        e["quaternion"] = {r.q[0], r.q[1], r.q[2], r.q[3]};
        e["angle_deg"] = r.angle() * 180.0 / kPi;
        arr.push_back(e);
      }
      std::ofstream f(o.poses_out);
      if (!f) throw DataError("cannot open poses file: " + o.poses_out);
      f << arr.dump(2) << "\n";
    }
  } else if (!o.poses_out.empty()) {
    throw ConfigError("--poses-out requires --pose-cap-deg > 0");
  }

  write_dataset(o.out, samples, o.rank);
  std::cout << "dataset: " << o.count << " samples at rank " << o.rank
            << " (seed " << o.seed << ") -> " << o.out << "\n";
}

// --------------------------------------------------------------- train ----

struct TrainOpts {
  std::string config;
  std::string data;
  std::string out;
  std::string log;
  std::string write_default_config;
};

void run_train(const TrainOpts& o) {
  if (!o.write_default_config.empty()) {
    std::ofstream f(o.write_default_config);
    if (!f)
      throw DataError("cannot open config file: " + o.write_default_config);
    f << default_config_text();
    std::cout << "default configuration -> " << o.write_default_config << "\n";
    return;
  }
  if (o.config.empty() || o.data.empty() || o.out.empty())
    throw ConfigError("train requires --config, --data, and --out");

  const Config cfg = load_config(o.config);
  int rank = -1;
  const std::vector<SegSample> dataset = read_dataset(o.data, &rank);
  if (rank != cfg.model.output_rank)
    throw ConfigError("dataset rank " + std::to_string(rank) +
                      " does not match configured output_rank " +
                      std::to_string(cfg.model.output_rank));

  const GeometryBundle gb = GeometryBundle::build(cfg.model);
  SphericalUNet model = [&] {
    if (cfg.train.init == "zeros") return SphericalUNet::init_zeros(cfg.model);
    RngState rng(cfg.train.seed);
    return SphericalUNet::init(cfg.model, rng);
  }();

  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!o.log.empty() && o.log != "-") {
    log_file.open(o.log);
    if (!log_file) throw DataError("cannot open log file: " + o.log);
    log = &log_file;
  }

  const TrainResult result = train_model(model, gb, dataset, cfg, log);

  std::map<std::string, std::string> meta;
  meta["epochs"] = std::to_string(result.epochs.size());
  meta["steps"] = std::to_string(result.steps);
  if (!result.epochs.empty()) {
    meta["final_total_loss"] = f64_to_string(result.epochs.back().total_loss);
    meta["final_seg_loss"] = f64_to_string(result.epochs.back().seg_loss);
  }
  save_checkpoint(o.out, model, cfg, meta);
  std::cerr << "trained " << result.steps << " steps over "
            << result.epochs.size() << " epochs -> " << o.out << "\n";
}

// -------------------------------------------------------------- stress ----

struct StressOpts {
  std::string checkpoint;
  std::string data;
  int rotations = 10;
  int repeats = 3;
  std::uint64_t seed = 1;
  std::string out;
};

void run_stress(const StressOpts& o) {
  LoadedCheckpoint lc = load_checkpoint(o.checkpoint);
  int rank = -1;
  const std::vector<SegSample> samples = read_dataset(o.data, &rank);
  if (rank != lc.config.model.output_rank)
    throw ConfigError("dataset rank " + std::to_string(rank) +
                      " does not match checkpoint output_rank " +
                      std::to_string(lc.config.model.output_rank));

  const GeometryBundle gb = GeometryBundle::build(lc.config.model);
  const StressReport report =
      run_stress(lc.model, gb, samples, o.rotations, o.repeats, o.seed);
  const std::string json = report.to_json();
  if (o.out.empty() || o.out == "-") {
    std::cout << json << "\n";
  } else {
    std::ofstream f(o.out);
    if (!f) throw DataError("cannot open report file: " + o.out);
    f << json << "\n";
    std::cout << "stress report (" << o.rotations << " rotations x "
              << o.repeats << " repeats, seed " << o.seed << ") -> " << o.out
              << "\n";
  }
}

// -------------------------------------------------------------- render ----

struct RenderOpts {
  std::string data;
  std::string checkpoint;
  int index = 0;
  int height = 128;
  std::string mode = "labels";
  std::string out;
};

void run_render(const RenderOpts& o) {
  int rank = -1;
  const std::vector<SegSample> samples = read_dataset(o.data, &rank);
  if (o.index < 0 || static_cast<std::size_t>(o.index) >= samples.size())
    throw ConfigError("sample index out of range");
  const IcosphereMesh mesh = build_icosphere(rank);
  const SegSample& s = samples[static_cast<std::size_t>(o.index)];

  Raster img;
  if (o.mode == "labels") {
    img = render_labels(mesh, s.labels, o.height);
  } else if (o.mode == "features") {
    img = render_features(mesh, s.features, o.height);
  } else if (o.mode == "pred") {
    if (o.checkpoint.empty())
      throw ConfigError("render --mode pred requires --checkpoint");
    LoadedCheckpoint lc = load_checkpoint(o.checkpoint);
    if (lc.config.model.output_rank != rank)
      throw ConfigError("checkpoint output_rank does not match dataset rank");
    const GeometryBundle gb = GeometryBundle::build(lc.config.model);
    const Matrix tokens = lc.model.project_tokens(s.features, gb, nullptr);
    const Matrix logits = lc.model.forward(tokens, gb, nullptr);
    img = render_labels(mesh, argmax_labels(logits), o.height);
  } else {
    throw ConfigError("render mode must be labels, features, or pred");
  }
  write_ppm(o.out, img);
  std::cout << "rendered sample " << o.index << " (" << o.mode << ", "
            << img.height << "x" << img.width << ") -> " << o.out << "\n";
}

// ------------------------------------------------------------ selftest ----

struct SelftestOpts {
  std::vector<std::string> only;
};

void run_selftest(const SelftestOpts& o) {
  using Entry = std::pair<std::string, CheckResult (*)()>;
  const std::vector<Entry> all = {
      {"mesh-invariants", &check_mesh_invariants},
      {"attention-quadrature", &check_attention_quadrature},
      {"frame-pooling", &check_frame_pooling},
      {"gradient-checks", &check_gradients},
      {"rotation-equivariance", &check_rotation_equivariance},
      {"consistency-loss", &check_consistency_loss},
  };

  std::vector<CheckResult> results;
  if (o.only.empty()) {
    results = run_all_checks();
  } else {
    for (const std::string& name : o.only) {
      bool found = false;
      for (const Entry& e : all) {
        if (e.first == name) {
          results.push_back(e.second());
          found = true;
          break;
        }
      }
      if (!found) throw ConfigError("unknown check: " + name);
    }
  }

  int failed = 0;
  for (const CheckResult& r : results) {
    if (!r.pass) ++failed;
    std::printf("[%s] %-22s %7.2fs  %s\n", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.seconds, r.detail.c_str());
  }
  std::printf("selftest: %zu/%zu checks passed\n", results.size() - failed,
              results.size());
  if (failed > 0) g_exit_code = 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"icosphere segmentation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "icoseg 0.1.0");

  MeshOpts mesh_opts;
  auto* mesh_cmd = app.add_subcommand("mesh", "build an icosphere mesh file");
  mesh_cmd->add_option("--rank", mesh_opts.rank, "subdivision rank")
      ->required();
  mesh_cmd->add_option("--out", mesh_opts.out, "output file")->required();
  mesh_cmd->callback([&] { run_mesh(mesh_opts); });

  TablesOpts tables_opts;
  auto* tables_cmd = app.add_subcommand(
      "tables", "build the geometry cache (and optional rank transfer)");
  tables_cmd->add_option("--mesh", tables_opts.mesh, "mesh file")->required();
  tables_cmd->add_option("--anchors", tables_opts.anchors,
                         "tangent anchors per node");
  tables_cmd->add_option("--bins", tables_opts.bins, "radial bins");
  tables_cmd->add_option("--out", tables_opts.out, "cache output file")
      ->required();
  tables_cmd->add_option("--coarse-mesh", tables_opts.coarse_mesh,
                         "coarser mesh for a rank transfer");
  tables_cmd->add_option("--transfer-out", tables_opts.transfer_out,
                         "rank transfer output file");
  tables_cmd->add_option("--sigma", tables_opts.sigma,
                         "upsample kernel width (0 = mean coarse edge)");
  tables_cmd->callback([&] { run_tables(tables_opts); });

  RotmapOpts rotmap_opts;
  auto* rotmap_cmd =
      app.add_subcommand("rotmap", "sample rotations and their node maps");
  rotmap_cmd->add_option("--mesh-token", rotmap_opts.mesh_token,
                         "token-rank mesh file")
      ->required();
  rotmap_cmd->add_option("--mesh-out", rotmap_opts.mesh_out,
                         "output-rank mesh file")
      ->required();
  rotmap_cmd->add_option("--seed", rotmap_opts.seed, "rng seed");
  rotmap_cmd->add_option("--mode", rotmap_opts.mode,
                         "capped35 | uniform | zyx");
  rotmap_cmd->add_option("--count", rotmap_opts.count, "number of rotations");
  rotmap_cmd->add_option("--out", rotmap_opts.out,
                         "output file (suffix .k added when count > 1)")
      ->required();
  rotmap_cmd->callback([&] { run_rotmap(rotmap_opts); });

  GenDataOpts gen_opts;
  auto* gen_cmd =
      app.add_subcommand("gen-data", "generate a synthetic labeled dataset");
  gen_cmd->add_option("--rank", gen_opts.rank, "icosphere rank");
  gen_cmd->add_option("--count", gen_opts.count, "number of samples")
      ->required();
  gen_cmd->add_option("--seed", gen_opts.seed, "rng seed");
  gen_cmd->add_option("--ignore-fraction", gen_opts.ignore_fraction,
                      "expected share of ignore-labeled nodes");
  gen_cmd->add_option("--pose-cap-deg", gen_opts.pose_cap_deg,
                      "perturb each sample by a random rotation up to this "
                      "many degrees (0 = off)");
  gen_cmd->add_option("--poses-out", gen_opts.poses_out,
                      "JSON file for the applied per-sample rotations");
  gen_cmd->add_option("--out", gen_opts.out, "output dataset file")
      ->required();
  gen_cmd->callback([&] { run_gen_data(gen_opts); });

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", train_opts.config, "config file");
  train_cmd->add_option("--data", train_opts.data, "dataset file");
  train_cmd->add_option("--out", train_opts.out, "checkpoint output file");
  train_cmd->add_option("--log", train_opts.log,
                        "epoch log file (default: stdout)");
  train_cmd->add_option("--write-default-config",
                        train_opts.write_default_config,
                        "write the documented default config and exit");
  train_cmd->callback([&] { run_train(train_opts); });

  StressOpts stress_opts;
  auto* stress_cmd = app.add_subcommand(
      "stress", "evaluate a checkpoint under random rotations");
  stress_cmd->add_option("--checkpoint", stress_opts.checkpoint,
                         "checkpoint file")
      ->required();
  stress_cmd->add_option("--data", stress_opts.data, "dataset file")
      ->required();
  stress_cmd->add_option("--rotations", stress_opts.rotations,
                         "rotations per repeat");
  stress_cmd->add_option("--repeats", stress_opts.repeats, "repeats");
  stress_cmd->add_option("--seed", stress_opts.seed, "rotation seed");
  stress_cmd->add_option("--out", stress_opts.out,
                         "report file (default: stdout)");
  stress_cmd->callback([&] { run_stress(stress_opts); });

  RenderOpts render_opts;
  auto* render_cmd =
      app.add_subcommand("render", "render a sample to an image");
  render_cmd->add_option("--data", render_opts.data, "dataset file")
      ->required();
  render_cmd->add_option("--checkpoint", render_opts.checkpoint,
                         "checkpoint (for --mode pred)");
  render_cmd->add_option("--index", render_opts.index, "sample index");
  render_cmd->add_option("--height", render_opts.height,
                         "image height (width is twice this)");
  render_cmd->add_option("--mode", render_opts.mode,
                         "labels | features | pred");
  render_cmd->add_option("--out", render_opts.out, "output image file")
      ->required();
  render_cmd->callback([&] { run_render(render_opts); });

  SelftestOpts selftest_opts;
  auto* selftest_cmd =
      app.add_subcommand("selftest", "run the built-in property checks");
  selftest_cmd->add_option("--only", selftest_opts.only,
                           "run only the named check (repeatable)");
  selftest_cmd->callback([&] { run_selftest(selftest_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const icoseg::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const icoseg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return g_exit_code;
}
