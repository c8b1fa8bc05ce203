#pragma once

// Dense vector kernels used on the matrix-free hot paths.
//
// Two implementations live side by side: `serial` is the plain reference
// (straightforward loops, no blocking) and `parallel` is the OpenMP version
// used by the library. Parallel reductions are computed over fixed-size
// chunks and summed in chunk order, so results do not depend on the thread
// count. The tests hold the two namespaces against each other.

#include <cstddef>
#include <span>

namespace curvlens::kernels {

namespace serial {

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);

// y = A x, A row-major rows x cols.
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);

// Y = A X with X (cols x k) and Y (rows x k) stored row-major.
void gemm(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y, std::size_t k);

// c[j] = <V_j, w> for the first `count` columns of a column-major dim x count basis.
void project(std::span<const double> basis, std::size_t dim, std::size_t count,
             std::span<const double> w, std::span<double> c);

// w -= V c over the first `count` columns.
void subtract_combination(std::span<const double> basis, std::size_t dim,
                          std::size_t count, std::span<const double> c,
                          std::span<double> w);

}  // namespace serial

namespace parallel {

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemm(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y, std::size_t k);
void project(std::span<const double> basis, std::size_t dim, std::size_t count,
             std::span<const double> w, std::span<double> c);
void subtract_combination(std::span<const double> basis, std::size_t dim,
                          std::size_t count, std::span<const double> c,
                          std::span<double> w);

}  // namespace parallel

using parallel::axpy;
using parallel::dot;
using parallel::gemm;
using parallel::gemv;
using parallel::project;
using parallel::scale;
using parallel::subtract_combination;

double norm2(std::span<const double> x);

// Thread cap for the parallel kernels. Reads CURVLENS_THREADS when called
// with no argument.
void configure_threads_from_env();
void set_max_threads(int n);
int max_threads();

}  // namespace curvlens::kernels
