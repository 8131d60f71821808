#include "icoseg/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "icoseg/container.hpp"
#include "icoseg/geometry.hpp"

namespace icoseg {

namespace {

// Zone backgrounds are distinct; the north/south cap families come in
// near-twin color pairs (6~11, 7~12, 8~13) that sit closer together than
// the low-frequency color noise, so telling them apart reliably requires
// either surrounding-zone context or a latitude shortcut.
const std::array<Vec3, kNumClasses> kPalette = {{
    {0.15, 0.15, 0.15},  // 0 ignore (render only)
    {0.10, 0.45, 0.95},  // 1 north zone
    {0.55, 0.85, 0.30},  // 2 mid zone
    {0.90, 0.55, 0.15},  // 3 south zone
    {0.95, 0.15, 0.15},  // 4 band
    {0.95, 0.90, 0.10},  // 5 band
    {0.92, 0.92, 0.92},  // 6 north cap, twin of 11
    {0.60, 0.20, 0.85},  // 7 north cap, twin of 12
    {0.10, 0.85, 0.85},  // 8 north cap, twin of 13
    {0.95, 0.45, 0.75},  // 9 mid cap
    {0.20, 0.20, 0.95},  // 10 mid cap
    {0.91, 0.93, 0.92},  // 11 south cap, twin of 6
    {0.61, 0.19, 0.84},  // 12 south cap, twin of 7
    {0.11, 0.84, 0.86},  // 13 south cap, twin of 8
}};

int zone_of(double z) {
  if (z > 1.0 / 3.0) return 1;
  if (z < -1.0 / 3.0) return 3;
  return 2;
}

// Cap class pools per zone of the cap center.
const std::array<std::vector<int>, 4> kZoneCapClasses = {
    std::vector<int>{},          // unused
    std::vector<int>{6, 7, 8},   // north
    std::vector<int>{9, 10},     // mid
    std::vector<int>{11, 12, 13}  // south
};

}  // namespace

const std::array<Vec3, kNumClasses>& class_palette() { return kPalette; }

SceneSpec sample_scene(RngState& rng, const SynthParams& params) {
  if (params.min_bands < 0 || params.max_bands < params.min_bands ||
      params.min_caps < 0 || params.max_caps < params.min_caps)
    throw ConfigError("synthetic scene: invalid band/cap count ranges");
  SceneSpec scene;

  const int n_bands =
      params.min_bands +
      static_cast<int>(rng.uniform_index(params.max_bands - params.min_bands + 1));
  for (int b = 0; b < n_bands; ++b) {
    BandSpec band;
    // Pole-biased normals make the bands prefer low latitudes.
    Vec3 g{rng.normal(), rng.normal(), rng.normal()};
    const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
    g[2] += sign * params.band_normal_bias;
    band.normal = normalized(g);
    band.halfwidth =
        rng.uniform(params.min_band_halfwidth, params.max_band_halfwidth);
    band.cls = 4 + static_cast<int>(rng.uniform_index(2));
    scene.bands.push_back(band);
  }

  const int n_caps =
      params.min_caps +
      static_cast<int>(rng.uniform_index(params.max_caps - params.min_caps + 1));
  std::array<std::vector<int>, 4> remaining = kZoneCapClasses;
  for (int c = 0; c < n_caps; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const Vec3 center = rng.unit_vector();
      auto& pool = remaining[zone_of(dot(center, scene.pole))];
      if (pool.empty()) continue;  // zone's ids used up, draw a new center
      const auto pick = rng.uniform_index(pool.size());
      CapSpec cap;
      cap.center = center;
      cap.radius = rng.uniform(params.min_cap_radius, params.max_cap_radius);
      cap.cls = pool[pick];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      scene.caps.push_back(cap);
      placed = true;
    }
    if (!placed) break;  // every zone exhausted; keep the caps we have
  }

  for (int k = 0; k < params.noise_harmonics; ++k) {
    scene.noise_dir.push_back(rng.unit_vector());
    scene.noise_amp.push_back({rng.uniform(-params.noise_amp, params.noise_amp),
                               rng.uniform(-params.noise_amp, params.noise_amp),
                               rng.uniform(-params.noise_amp, params.noise_amp)});
  }
  return scene;
}

SceneSpec rotate_scene(const SceneSpec& scene, const Rotation& r) {
  SceneSpec out = scene;
  out.pole = r.apply(scene.pole);
  for (auto& band : out.bands) band.normal = r.apply(band.normal);
  for (auto& cap : out.caps) cap.center = r.apply(cap.center);
  for (auto& dir : out.noise_dir) dir = r.apply(dir);
  return out;
}

std::vector<std::int32_t> paint_labels(const IcosphereMesh& mesh,
                                       const SceneSpec& scene) {
  std::vector<std::int32_t> labels(mesh.vertex_count());
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    const Vec3& p = mesh.vertices[i];
    int cls = zone_of(dot(p, scene.pole));
    for (const auto& band : scene.bands)
      if (std::abs(dot(p, band.normal)) <= band.halfwidth) cls = band.cls;
    for (const auto& cap : scene.caps)
      if (geodesic_distance(p, cap.center) <= cap.radius) cls = cap.cls;
    labels[i] = cls;
  }
  return labels;
}

Matrix paint_features(const IcosphereMesh& mesh, const SceneSpec& scene,
                      const std::vector<std::int32_t>& labels) {
  if (labels.size() != mesh.vertex_count())
    throw ConfigError("paint_features: label count mismatch");
  Matrix f(mesh.vertex_count(), 3);
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    const Vec3& p = mesh.vertices[i];
    const Vec3& base = kPalette[static_cast<std::size_t>(labels[i])];
    double* row = f.row(i);
    for (int ch = 0; ch < 3; ++ch) row[ch] = base[ch];
    for (std::size_t k = 0; k < scene.noise_dir.size(); ++k) {
      const double proj = dot(p, scene.noise_dir[k]);
      for (int ch = 0; ch < 3; ++ch) row[ch] += scene.noise_amp[k][ch] * proj;
    }
  }
  return f;
}

std::vector<SegSample> make_synthetic_dataset(const IcosphereMesh& mesh,
                                              int count, std::uint64_t seed,
                                              const SynthParams& params) {
  if (count < 1) throw ConfigError("dataset count must be >= 1");
  RngState rng(seed);
  std::vector<SegSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    SceneSpec scene = sample_scene(rng, params);
    if (params.pose_max_angle > 0.0) {
      const Rotation pose = sample_rotation_capped(params.pose_max_angle, rng);
      scene = rotate_scene(scene, pose);
    }
    SegSample sample;
    sample.labels = paint_labels(mesh, scene);
    sample.features = paint_features(mesh, scene, sample.labels);
    for (auto& y : sample.labels)
      if (rng.uniform() < params.ignore_fraction) y = 0;
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<Rotation> pose_perturb_dataset(std::vector<SegSample>& samples,
                                           const IcosphereMesh& mesh,
                                           double max_angle, RngState& rng) {
  std::vector<Rotation> poses;
  poses.reserve(samples.size());
  for (SegSample& s : samples) {
    if (s.labels.size() != mesh.vertex_count() ||
        s.features.rows != mesh.vertex_count())
      throw ConfigError("pose_perturb_dataset: sample does not match mesh");
    const Rotation pose = sample_rotation_capped(max_angle, rng);
    const std::vector<std::int32_t> map = nearest_index_map(pose, mesh);
    Matrix feats(s.features.rows, s.features.cols);
    std::vector<std::int32_t> labels(s.labels.size());
    for (std::size_t t = 0; t < map.size(); ++t) {
      const auto src = static_cast<std::size_t>(map[t]);
      for (std::size_t ch = 0; ch < s.features.cols; ++ch)
        feats.at(t, ch) = s.features.at(src, ch);
      labels[t] = s.labels[src];
    }
    s.features = std::move(feats);
    s.labels = std::move(labels);
    poses.push_back(pose);
  }
  return poses;
}

void write_dataset(const std::string& path,
                   const std::vector<SegSample>& samples, int rank) {
  if (samples.empty()) throw DataError("refusing to write empty dataset");
  const std::size_t L = samples.front().labels.size();
  for (const auto& s : samples)
    if (s.labels.size() != L || s.features.rows != L || s.features.cols != 3)
      throw DataError("write_dataset: inconsistent sample shapes");

  Container c;
  c.kind = "dataset";
  c.meta["rank"] = std::to_string(rank);
  c.meta["count"] = std::to_string(samples.size());
  c.meta["nodes"] = std::to_string(L);

  std::vector<double> feats(samples.size() * L * 3);
  std::vector<std::int32_t> labels(samples.size() * L);
  for (std::size_t n = 0; n < samples.size(); ++n) {
    std::copy(samples[n].features.a.begin(), samples[n].features.a.end(),
              feats.begin() + static_cast<std::ptrdiff_t>(n * L * 3));
    std::copy(samples[n].labels.begin(), samples[n].labels.end(),
              labels.begin() + static_cast<std::ptrdiff_t>(n * L));
  }
  c.add_f64("features", {samples.size(), L, 3}, feats.data());
  c.add_i32("labels", {samples.size(), L}, labels.data());
  write_container(path, c);
}

std::vector<SegSample> read_dataset(const std::string& path, int* rank_out) {
  const Container c = read_container(path, "dataset");
  const auto count = static_cast<std::size_t>(c.meta_i64("count"));
  const auto L = static_cast<std::size_t>(c.meta_i64("nodes"));
  if (rank_out) *rank_out = static_cast<int>(c.meta_i64("rank"));

  const auto feats = c.get_f64("features");
  const auto labels = c.get_i32("labels");
  if (feats.size() != count * L * 3 || labels.size() != count * L)
    throw DataError("dataset sections do not match meta counts");

  std::vector<SegSample> out(count);
  for (std::size_t n = 0; n < count; ++n) {
    out[n].features = Matrix(L, 3);
    std::copy(feats.begin() + static_cast<std::ptrdiff_t>(n * L * 3),
              feats.begin() + static_cast<std::ptrdiff_t>((n + 1) * L * 3),
              out[n].features.a.begin());
    out[n].labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(n * L),
                         labels.begin() + static_cast<std::ptrdiff_t>((n + 1) * L));
  }
  return out;
}

}  // namespace icoseg
