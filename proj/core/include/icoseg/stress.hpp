#pragma once

// Rotation stress protocol: evaluate once in the canonical pose, then under
// n_repeats independent batches of n_rotations random ZYX poses (yaw and
// roll up to 360 degrees, pitch up to 180). The rotation list is a pure
// function of the seed, so different model variants face identical poses.
// For each pose the input field is rotated with the forward gather map, the
// prediction is pulled back to the canonical frame with the inverse map,
// and scored against the untouched labels; a rotation-invariant predictor
// therefore scores exactly its canonical number.

#include <cstdint>
#include <string>
#include <vector>

#include "icoseg/dataset.hpp"
#include "icoseg/metrics.hpp"
#include "icoseg/model.hpp"
#include "icoseg/so3.hpp"

namespace icoseg {

struct StressRotationEntry {
  std::array<double, 4> quaternion{1, 0, 0, 0};
  std::int32_t provenance = 0;
  double angle_deg = 0.0;
  double miou = 0.0;
  bool defined = false;
};

struct StressReport {
  int n_rotations = 0, n_repeats = 0;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  int output_rank = 0;
  double base_miou = 0.0;
  bool base_defined = false;
  double so3_miou = 0.0;  // mean over all rotation entries
  bool so3_defined = false;
  std::vector<StressRotationEntry> rotations;

  std::string to_json() const;
};

// The exact rotation list a given (seed, n_rotations, n_repeats) produces.
std::vector<Rotation> stress_rotations(std::uint64_t seed, int n_rotations,
                                       int n_repeats);

StressReport run_stress(SphericalUNet& model, const GeometryBundle& gb,
                        const std::vector<SegSample>& samples,
                        int n_rotations, int n_repeats, std::uint64_t seed);

}  // namespace icoseg
