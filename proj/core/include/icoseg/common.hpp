#pragma once

// Shared numeric primitives: 3-vectors on the unit sphere, a dense row-major
// matrix for node features, and the two error categories the tools map to
// process exit codes (ConfigError -> 2, DataError -> 3).

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace icoseg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1],
          a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 add(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Vec3 sub(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Vec3 scale(const Vec3& a, double s) {
  return {a[0] * s, a[1] * s, a[2] * s};
}

// Returns a/|a|; throws DataError on vanishing norm.
inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (!(n > 1e-300)) throw DataError("cannot normalize zero vector");
  return scale(a, 1.0 / n);
}

inline bool is_unit(const Vec3& a, double tol = 1e-9) {
  return std::abs(norm(a) - 1.0) <= tol;
}

// Dense row-major matrix of doubles. Rows index sphere nodes in most of the
// library; columns index feature channels.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
  double* row(std::size_t r) { return a.data() + r * cols; }
  const double* row(std::size_t r) const { return a.data() + r * cols; }
  std::size_t size() const { return a.size(); }

  bool has_non_finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return true;
    return false;
  }
};

inline Matrix operator+(const Matrix& x, const Matrix& y) {
  if (x.rows != y.rows || x.cols != y.cols)
    throw DataError("matrix shape mismatch in operator+");
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.a.size(); ++i) out.a[i] = x.a[i] + y.a[i];
  return out;
}

// out = x * w where w is (x.cols x out_cols), row-major.
inline Matrix matmul(const Matrix& x, const std::vector<double>& w,
                     std::size_t out_cols) {
  if (w.size() != x.cols * out_cols)
    throw DataError("matmul: weight size mismatch");
  Matrix out(x.rows, out_cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double* orow = out.row(r);
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      const double* wrow = w.data() + k * out_cols;
      for (std::size_t c = 0; c < out_cols; ++c) orow[c] += xv * wrow[c];
    }
  }
  return out;
}

constexpr double kPi = 3.14159265358979323846264338327950288;

}  // namespace icoseg
