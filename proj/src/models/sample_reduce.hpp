#pragma once

// Deterministic parallel sums over batch samples: samples are split into
// fixed chunks, each chunk accumulates into its own buffer and the buffers
// are added in chunk order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace curvlens::detail {

inline constexpr std::size_t kSampleChunk = 32;

template <class Body>
void reduce_samples(std::size_t count, std::span<double> out, Body&& body) {
  const std::size_t width = out.size();
  const std::size_t chunks = (count + kSampleChunk - 1) / kSampleChunk;
  std::fill(out.begin(), out.end(), 0.0);
  if (chunks == 0) return;
  if (chunks == 1) {
    body(std::size_t{0}, count, out);
    return;
  }
  std::vector<double> partial(chunks * width, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kSampleChunk;
    const std::size_t end = std::min(count, begin + kSampleChunk);
    body(begin, end, std::span<double>(partial.data() + static_cast<std::size_t>(c) * width, width));
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    const double* p = partial.data() + c * width;
    for (std::size_t i = 0; i < width; ++i) out[i] += p[i];
  }
}

// Row-stable softmax of z into p; returns log-sum-exp.
inline double softmax(std::span<const double> z, std::span<double> p) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    s += p[i];
  }
  for (double& x : p) x /= s;
  return zmax + std::log(s);
}

// u <- (diag(p) - p p') u
inline void softmax_hessian_apply(std::span<const double> p, std::span<double> u) {
  double pu = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) pu += p[i] * u[i];
  for (std::size_t i = 0; i < p.size(); ++i) u[i] = p[i] * (u[i] - pu);
}

}  // namespace curvlens::detail
