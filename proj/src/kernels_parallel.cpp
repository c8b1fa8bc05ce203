#include "curvlens/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

namespace curvlens::kernels {

namespace {

// Reductions are split into chunks of this many elements; partial sums are
// combined in chunk order.
constexpr std::size_t kChunk = 4096;
// Below this many elements the loops stay on the calling thread.
constexpr std::size_t kParallelThreshold = 1u << 15;

using Index = std::ptrdiff_t;

}  // namespace

namespace parallel {

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  const std::size_t n = x.size();
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  if (chunks <= 1) return serial::dot(x, y);
  std::vector<double> partial(chunks);
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (Index b = 0; b < static_cast<Index>(chunks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kChunk;
    const std::size_t len = std::min(kChunk, n - lo);
    partial[b] = serial::dot(x.subspan(lo, len), y.subspan(lo, len));
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  const Index n = static_cast<Index>(x.size());
  const double* xp = x.data();
  double* yp = y.data();
#pragma omp parallel for simd schedule(static) if (x.size() >= kParallelThreshold)
  for (Index i = 0; i < n; ++i) yp[i] += a * xp[i];
}

void scale(double a, std::span<double> x) {
  const Index n = static_cast<Index>(x.size());
  double* xp = x.data();
#pragma omp parallel for simd schedule(static) if (x.size() >= kParallelThreshold)
  for (Index i = 0; i < n; ++i) xp[i] *= a;
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * cols && x.size() == cols && y.size() == rows);
  const double* ap = a.data();
  const double* xp = x.data();
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelThreshold)
  for (Index i = 0; i < static_cast<Index>(rows); ++i) {
    const double* row = ap + static_cast<std::size_t>(i) * cols;
    // Four independent accumulators break the add dependency chain.
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      s0 += row[j] * xp[j];
      s1 += row[j + 1] * xp[j + 1];
      s2 += row[j + 2] * xp[j + 2];
      s3 += row[j + 3] * xp[j + 3];
    }
    for (; j < cols; ++j) s0 += row[j] * xp[j];
    y[i] = (s0 + s1) + (s2 + s3);
  }
}

void gemm(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y, std::size_t k) {
  assert(a.size() == rows * cols && x.size() == cols * k && y.size() == rows * k);
  constexpr std::size_t R = 4;
  constexpr std::size_t C = 8;
  const double* __restrict ap = a.data();
  const double* __restrict xp = x.data();
  double* __restrict yp = y.data();
  const Index row_tiles = static_cast<Index>((rows + R - 1) / R);

#pragma omp parallel for schedule(static) if (rows * cols * k >= kParallelThreshold)
  for (Index t = 0; t < row_tiles; ++t) {
    const std::size_t i0 = static_cast<std::size_t>(t) * R;
    const std::size_t ni = std::min(R, rows - i0);
    for (std::size_t c0 = 0; c0 < k; c0 += C) {
      const std::size_t nc = std::min(C, k - c0);
      if (ni == R && nc == C) {
        double acc[R][C] = {};
        const double* a0 = ap + i0 * cols;
        const double* a1 = a0 + cols;
        const double* a2 = a1 + cols;
        const double* a3 = a2 + cols;
        for (std::size_t j = 0; j < cols; ++j) {
          const double* xj = xp + j * k + c0;
          const double b0 = a0[j], b1 = a1[j], b2 = a2[j], b3 = a3[j];
          for (std::size_t c = 0; c < C; ++c) {
            acc[0][c] += b0 * xj[c];
            acc[1][c] += b1 * xj[c];
            acc[2][c] += b2 * xj[c];
            acc[3][c] += b3 * xj[c];
          }
        }
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t c = 0; c < C; ++c) yp[(i0 + r) * k + c0 + c] = acc[r][c];
      } else {
        for (std::size_t r = 0; r < ni; ++r) {
          const double* arow = ap + (i0 + r) * cols;
          for (std::size_t c = 0; c < nc; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j) s += arow[j] * xp[j * k + c0 + c];
            yp[(i0 + r) * k + c0 + c] = s;
          }
        }
      }
    }
  }
}

void project(std::span<const double> basis, std::size_t dim, std::size_t count,
             std::span<const double> w, std::span<double> c) {
  assert(basis.size() >= dim * count && w.size() == dim && c.size() >= count);
#pragma omp parallel for schedule(static) if (dim * count >= kParallelThreshold)
  for (Index j = 0; j < static_cast<Index>(count); ++j) {
    c[j] = serial::dot(basis.subspan(static_cast<std::size_t>(j) * dim, dim), w);
  }
}

void subtract_combination(std::span<const double> basis, std::size_t dim,
                          std::size_t count, std::span<const double> c,
                          std::span<double> w) {
  assert(basis.size() >= dim * count && w.size() == dim && c.size() >= count);
  const Index chunks = static_cast<Index>((dim + kChunk - 1) / kChunk);
#pragma omp parallel for schedule(static) if (dim * count >= kParallelThreshold)
  for (Index b = 0; b < chunks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kChunk;
    const std::size_t len = std::min(kChunk, dim - lo);
    double* wp = w.data() + lo;
    for (std::size_t j = 0; j < count; ++j) {
      const double* v = basis.data() + j * dim + lo;
      const double cj = c[j];
      for (std::size_t i = 0; i < len; ++i) wp[i] -= cj * v[i];
    }
  }
}

}  // namespace parallel

double norm2(std::span<const double> x) { return std::sqrt(parallel::dot(x, x)); }

void set_max_threads(int n) { omp_set_num_threads(std::max(1, n)); }

int max_threads() { return omp_get_max_threads(); }

void configure_threads_from_env() {
  if (const char* env = std::getenv("CURVLENS_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) set_max_threads(n);
    } catch (const std::exception&) {
      // Unparseable values leave the OpenMP default in place.
    }
  }
}

}  // namespace curvlens::kernels
