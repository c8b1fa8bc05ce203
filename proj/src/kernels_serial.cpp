#include "curvlens/kernels.hpp"

#include <cassert>
#include <cmath>

namespace curvlens::kernels::serial {

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void scale(double a, std::span<double> x) {
  for (double& v : x) v *= a;
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * cols && x.size() == cols && y.size() == rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += a[i * cols + j] * x[j];
    y[i] = s;
  }
}

void gemm(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y, std::size_t k) {
  assert(a.size() == rows * cols && x.size() == cols * k && y.size() == rows * k);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += a[i * cols + j] * x[j * k + c];
      y[i * k + c] = s;
    }
  }
}

void project(std::span<const double> basis, std::size_t dim, std::size_t count,
             std::span<const double> w, std::span<double> c) {
  assert(basis.size() >= dim * count && w.size() == dim && c.size() >= count);
  for (std::size_t j = 0; j < count; ++j) c[j] = dot(basis.subspan(j * dim, dim), w);
}

void subtract_combination(std::span<const double> basis, std::size_t dim,
                          std::size_t count, std::span<const double> c,
                          std::span<double> w) {
  assert(basis.size() >= dim * count && w.size() == dim && c.size() >= count);
  for (std::size_t j = 0; j < count; ++j) axpy(-c[j], basis.subspan(j * dim, dim), w);
}

}  // namespace curvlens::kernels::serial
