#pragma once

// Synthetic spherical segmentation scenes. A scene is a closed-form labeling
// of the sphere: three equal-area latitude zones as background, a few tilted
// great-circle bands, and a handful of spherical caps whose class ids are
// keyed to the zone their center falls in. Features are a fixed per-class
// color palette plus smooth low-frequency color noise. Because the labeling
// is a function of direction, a rotated copy of a scene is produced exactly
// by rotating its parameters and repainting; no resampling is involved.
//
// The zone/cap structure deliberately correlates class identity with
// latitude: models that key on absolute latitude can exploit it in the
// canonical pose, and lose exactly that advantage under rotation. Label 0
// is an ignore mask applied after painting.

#include <cstdint>
#include <string>
#include <vector>

#include "icoseg/common.hpp"
#include "icoseg/icosphere.hpp"
#include "icoseg/rng.hpp"
#include "icoseg/so3.hpp"

namespace icoseg {

inline constexpr int kNumClasses = 14;  // 0 = ignore, 1..13 semantic

struct SegSample {
  Matrix features;                   // nodes x 3
  std::vector<std::int32_t> labels;  // nodes
};

struct CapSpec {
  Vec3 center{0, 0, 1};
  double radius = 0.3;  // geodesic radius, radians
  int cls = 6;
};

struct BandSpec {
  Vec3 normal{0, 0, 1};
  double halfwidth = 0.1;  // |p . n| <= halfwidth
  int cls = 4;
};

struct SceneSpec {
  // Axis the background zones are measured against. Scenes are generated
  // with the canonical pole; rotating a scene rotates this axis too, so a
  // rotated scene paints exactly the rotation of the original field.
  Vec3 pole{0, 0, 1};
  std::vector<BandSpec> bands;
  std::vector<CapSpec> caps;
  // Smooth color noise: per channel sum_k amp[k][ch] * (p . dir[k]).
  std::vector<Vec3> noise_dir;
  std::vector<std::array<double, 3>> noise_amp;
};

struct SynthParams {
  int min_bands = 1, max_bands = 3;
  int min_caps = 3, max_caps = 8;
  double min_cap_radius = 0.18, max_cap_radius = 0.42;
  double min_band_halfwidth = 0.06, max_band_halfwidth = 0.14;
  double band_normal_bias = 2.0;   // pull of band normals toward the poles
  int noise_harmonics = 3;
  double noise_amp = 0.15;         // per-harmonic, per-channel amplitude
  double ignore_fraction = 0.02;   // expected share of label-0 nodes
  double pose_max_angle = 0.0;     // per-sample random pose cap, radians
};

const std::array<Vec3, kNumClasses>& class_palette();

SceneSpec sample_scene(RngState& rng, const SynthParams& params);
SceneSpec rotate_scene(const SceneSpec& scene, const Rotation& r);

// Geometric labels only, no ignore mask: caps beat bands beat zones.
std::vector<std::int32_t> paint_labels(const IcosphereMesh& mesh,
                                       const SceneSpec& scene);
Matrix paint_features(const IcosphereMesh& mesh, const SceneSpec& scene,
                      const std::vector<std::int32_t>& labels);

// Full pipeline: scene -> optional random pose -> paint -> ignore mask.
std::vector<SegSample> make_synthetic_dataset(const IcosphereMesh& mesh,
                                              int count, std::uint64_t seed,
                                              const SynthParams& params = {});

// Default cap for pose-perturbed evaluation sets: 35 degrees.
inline constexpr double kDefaultPoseCap = 35.0 * kPi / 180.0;

// Rotates each sample in place by an independent capped axis-angle draw,
// realized as a nearest-node gather on `mesh`, and returns the rotation
// used per sample. A zero cap leaves every sample bit-identical.
std::vector<Rotation> pose_perturb_dataset(std::vector<SegSample>& samples,
                                           const IcosphereMesh& mesh,
                                           double max_angle, RngState& rng);

void write_dataset(const std::string& path,
                   const std::vector<SegSample>& samples, int rank);
std::vector<SegSample> read_dataset(const std::string& path,
                                    int* rank_out = nullptr);

}  // namespace icoseg
