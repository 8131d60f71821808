#include "icoseg/erp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace icoseg {

Vec3 erp_direction(int row, int col, int height, int width) {
  const double lon =
      2.0 * kPi * (static_cast<double>(col) + 0.5) / static_cast<double>(width) - kPi;
  const double lat =
      kPi / 2.0 - kPi * (static_cast<double>(row) + 0.5) / static_cast<double>(height);
  const double cl = std::cos(lat);
  return {cl * std::cos(lon), cl * std::sin(lon), std::sin(lat)};
}

void erp_coords(const Vec3& dir, int height, int width, double* row,
                double* col) {
  const Vec3 d = normalized(dir);
  const double lon = std::atan2(d[1], d[0]);
  const double lat = std::asin(std::clamp(d[2], -1.0, 1.0));
  double c = (lon + kPi) / (2.0 * kPi) * static_cast<double>(width) - 0.5;
  double r = (kPi / 2.0 - lat) / kPi * static_cast<double>(height) - 0.5;
  const double w = static_cast<double>(width);
  c = std::fmod(c, w);
  if (c < 0.0) c += w;
  r = std::clamp(r, 0.0, static_cast<double>(height) - 1.0);
  *row = r;
  *col = c;
}

namespace {

double sample_bilinear(const Raster& in, double row, double col, int ch) {
  const int H = in.height, W = in.width;
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0;
  const double fc = col - c0;
  // Longitude wraps, latitude clamps.
  const int r0c = std::clamp(r0, 0, H - 1);
  const int r1c = std::clamp(r0 + 1, 0, H - 1);
  const int c0w = ((c0 % W) + W) % W;
  const int c1w = (c0w + 1) % W;
  const double v00 = in.at(r0c, c0w, ch);
  const double v01 = in.at(r0c, c1w, ch);
  const double v10 = in.at(r1c, c0w, ch);
  const double v11 = in.at(r1c, c1w, ch);
  return (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) +
         fr * ((1.0 - fc) * v10 + fc * v11);
}

void nearest_pixel(double row, double col, int H, int W, int* r, int* c) {
  int rr = static_cast<int>(std::lround(row));
  int cc = static_cast<int>(std::lround(col));
  rr = std::clamp(rr, 0, H - 1);
  cc = ((cc % W) + W) % W;
  *r = rr;
  *c = cc;
}

}  // namespace

Raster erp_remap(const Raster& in, const Rotation& r, Interp interp) {
  if (in.height < 1 || in.width < 1 || in.channels < 1)
    throw DataError("erp_remap: empty raster");
  Raster out(in.height, in.width, in.channels);
  const Rotation rinv = r.inverse();
  for (int row = 0; row < in.height; ++row) {
    for (int col = 0; col < in.width; ++col) {
      const Vec3 src = rinv.apply(erp_direction(row, col, in.height, in.width));
      double srow, scol;
      erp_coords(src, in.height, in.width, &srow, &scol);
      if (interp == Interp::bilinear) {
        for (int ch = 0; ch < in.channels; ++ch)
          out.at(row, col, ch) = sample_bilinear(in, srow, scol, ch);
      } else {
        int pr, pc;
        nearest_pixel(srow, scol, in.height, in.width, &pr, &pc);
        for (int ch = 0; ch < in.channels; ++ch)
          out.at(row, col, ch) = in.at(pr, pc, ch);
      }
    }
  }
  return out;
}

LabelRaster erp_remap_labels(const LabelRaster& in, const Rotation& r) {
  if (in.height < 1 || in.width < 1) throw DataError("erp_remap_labels: empty");
  LabelRaster out(in.height, in.width);
  const Rotation rinv = r.inverse();
  for (int row = 0; row < in.height; ++row) {
    for (int col = 0; col < in.width; ++col) {
      const Vec3 src = rinv.apply(erp_direction(row, col, in.height, in.width));
      double srow, scol;
      erp_coords(src, in.height, in.width, &srow, &scol);
      int pr, pc;
      nearest_pixel(srow, scol, in.height, in.width, &pr, &pc);
      out.at(row, col) = in.at(pr, pc);
    }
  }
  return out;
}

void write_ppm(const std::string& path, const Raster& img) {
  if (img.channels != 3) throw DataError("write_ppm requires 3 channels");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(img.at(r, c, ch), 0.0, 1.0);
        row[static_cast<std::size_t>(c) * 3 + ch] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw DataError("write failed for '" + path + "'");
}

Raster read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  std::string magic;
  is >> magic;
  if (magic != "P6") throw DataError("'" + path + "' is not a P6 PPM");
  auto next_int = [&is, &path]() {
    // Skip whitespace and # comments between header fields.
    for (;;) {
      const int c = is.peek();
      if (c == EOF) throw DataError("'" + path + "': truncated PPM header");
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        is.get();
      } else {
        break;
      }
    }
    long v = 0;
    is >> v;
    if (!is) throw DataError("'" + path + "': malformed PPM header");
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (w < 1 || h < 1 || maxval != 255)
    throw DataError("'" + path + "': unsupported PPM geometry");
  is.get();  // single whitespace after maxval
  Raster img(static_cast<int>(h), static_cast<int>(w), 3);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw DataError("'" + path + "': truncated PPM payload");
  for (std::size_t i = 0; i < bytes.size(); ++i)
    img.data[i] = static_cast<double>(bytes[i]) / 255.0;
  return img;
}

}  // namespace icoseg
