#include "icoseg/render.hpp"

#include <algorithm>

namespace icoseg {

namespace {

std::vector<std::int32_t> nearest_node_per_pixel(const IcosphereMesh& mesh,
                                                 int height, int width) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Vec3 dir = erp_direction(r, c, height, width);
      double best = -2.0;
      std::int32_t best_idx = 0;
      for (std::size_t j = 0; j < mesh.vertex_count(); ++j) {
        const double d = dot(dir, mesh.vertices[j]);
        if (d > best) {
          best = d;
          best_idx = static_cast<std::int32_t>(j);
        }
      }
      out[static_cast<std::size_t>(r) * width + c] = best_idx;
    }
  }
  return out;
}

}  // namespace

Raster render_labels(const IcosphereMesh& mesh,
                     const std::vector<std::int32_t>& labels, int height) {
  if (height < 2) throw ConfigError("render height must be >= 2");
  if (labels.size() != mesh.vertex_count())
    throw ConfigError("render_labels: label count mismatch");
  const int width = 2 * height;
  const auto nearest = nearest_node_per_pixel(mesh, height, width);
  const auto& palette = class_palette();

  Raster img(height, width, 3);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const std::int32_t node = nearest[static_cast<std::size_t>(r) * width + c];
      const std::int32_t cls = labels[static_cast<std::size_t>(node)];
      if (cls < 0 || cls >= kNumClasses)
        throw DataError("render_labels: class id out of range");
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) = palette[static_cast<std::size_t>(cls)][ch];
    }
  return img;
}

Raster render_features(const IcosphereMesh& mesh, const Matrix& features,
                       int height) {
  if (height < 2) throw ConfigError("render height must be >= 2");
  if (features.rows != mesh.vertex_count() || features.cols < 3)
    throw ConfigError("render_features: feature shape mismatch");
  const int width = 2 * height;
  const auto nearest = nearest_node_per_pixel(mesh, height, width);

  Raster img(height, width, 3);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const std::int32_t node = nearest[static_cast<std::size_t>(r) * width + c];
      const double* f = features.row(static_cast<std::size_t>(node));
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) = std::clamp(f[ch], 0.0, 1.0);
    }
  return img;
}

}  // namespace icoseg
