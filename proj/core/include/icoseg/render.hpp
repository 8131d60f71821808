#pragma once

// Equirectangular rendering of node fields: each pixel takes the value of
// the nearest mesh node (by dot product). Labels use the class palette.

#include <cstdint>
#include <vector>

#include "icoseg/dataset.hpp"
#include "icoseg/erp.hpp"
#include "icoseg/icosphere.hpp"

namespace icoseg {

// W = 2H. Labels render with class_palette(); label 0 renders dark gray.
Raster render_labels(const IcosphereMesh& mesh,
                     const std::vector<std::int32_t>& labels, int height);

// First three feature channels, clamped to [0, 1].
Raster render_features(const IcosphereMesh& mesh, const Matrix& features,
                       int height);

}  // namespace icoseg
