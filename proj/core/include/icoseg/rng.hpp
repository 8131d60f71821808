#pragma once

// Deterministic random source. The generator is std::mt19937_64 but all
// mappings from raw 64-bit draws to doubles are written out here so that a
// fixed seed yields a bit-identical stream on every platform and compiler
// (std::uniform_real_distribution et al. do not guarantee that).

#include <cstdint>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "icoseg/common.hpp"

namespace icoseg {

class RngState {
 public:
  explicit RngState(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1): 53-bit mantissa of one raw draw.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer uniform in [0, n) by rejection, bias-free.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw ConfigError("uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return draw % n;
  }

  // Standard normal via Box-Muller; two uniform draws per call, no caching,
  // so the draw count per sample is fixed.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Isotropic unit vector: normalized Gaussian triple, redrawn while the
  // norm is too small to normalize safely.
  Vec3 unit_vector() {
    for (;;) {
      Vec3 v{normal(), normal(), normal()};
      if (norm(v) > 1e-12) return normalized(v);
    }
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void deserialize(const std::string& text) {
    std::istringstream is(text);
    is >> engine_;
    if (!is) throw DataError("malformed rng state string");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace icoseg
