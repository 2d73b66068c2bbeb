#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vaesurv {

// Dense row-major matrix of 64-bit reals. Row and column vectors are
// 1xN / Nx1 matrices; there is no broadcasting beyond what the autodiff
// ops define explicitly.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
  }

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  int size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

  double* data() { return a.data(); }
  const double* data() const { return a.data(); }

  static Matrix zeros(int r, int c) { return Matrix(r, c, 0.0); }

  static Matrix from_row(const std::vector<double>& v) {
    Matrix m(1, static_cast<int>(v.size()));
    m.a = v;
    return m;
  }

  static Matrix from_col(const std::vector<double>& v) {
    Matrix m(static_cast<int>(v.size()), 1);
    m.a = v;
    return m;
  }
};

inline bool all_finite(const Matrix& m) {
  for (double v : m.a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace vaesurv
