#pragma once

// Equirectangular panorama handling. Pixel (row, col) of an H x W raster is
// centered at longitude 2*pi*(col+0.5)/W - pi and latitude pi/2 - pi*(row+0.5)/H.
// Rotations act by inverse mapping: the output pixel looks up the input at
// the pulled-back direction, bilinearly for color (wrapping longitude,
// clamping latitude) and nearest-neighbor for labels. A pure yaw by a
// multiple of 2*pi/W is an exact column shift, which the tests assert.

#include <cstdint>
#include <string>
#include <vector>

#include "icoseg/common.hpp"
#include "icoseg/so3.hpp"

namespace icoseg {

struct Raster {
  int height = 0, width = 0, channels = 0;
  std::vector<double> data;  // row-major H x W x C, values in [0, 1]

  Raster() = default;
  Raster(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0) {}
  double& at(int r, int c, int ch) {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
  double at(int r, int c, int ch) const {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
};

struct LabelRaster {
  int height = 0, width = 0;
  std::vector<std::int32_t> data;

  LabelRaster() = default;
  LabelRaster(int h, int w)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}
  std::int32_t& at(int r, int c) {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  std::int32_t at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * width + c];
  }
};

// Unit direction of the pixel center.
Vec3 erp_direction(int row, int col, int height, int width);

// Continuous pixel coordinates (row, col) of a unit direction; col wraps in
// [0, width), row is clamped to [0, height).
void erp_coords(const Vec3& dir, int height, int width, double* row,
                double* col);

enum class Interp { nearest, bilinear };

// Output pixel p samples the input at R^-1 dir(p).
Raster erp_remap(const Raster& in, const Rotation& r, Interp interp);
LabelRaster erp_remap_labels(const LabelRaster& in, const Rotation& r);

// Binary PPM (P6), 8 bits per channel. Values are clamped to [0, 1] on
// write and scaled back on read. Raster must have 3 channels.
void write_ppm(const std::string& path, const Raster& img);
Raster read_ppm(const std::string& path);

}  // namespace icoseg
