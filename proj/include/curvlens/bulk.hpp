#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "curvlens/operator.hpp"
#include "curvlens/spectral_density.hpp"

namespace curvlens {

enum class BulkMethod { random_vector_weighted, gradient_median };

std::string_view to_string(BulkMethod method);

struct BulkEstimate {
  double lambda_b = 0.0;
  std::size_t removed_zero_modes = 0;
  std::size_t removed_outliers = 0;
  BulkMethod method = BulkMethod::random_vector_weighted;
};

/// Weighted bulk mean of a quadrature mixture: drops the atom of smallest
/// |lambda| (the ghost zero spike) and the `layers` largest atoms, then
/// renormalizes. Needs more than layers + 2 atoms.
BulkEstimate bulk_mean_random_vector(const DiracMixture& d, std::size_t layers);

/// Median of the Ritz values left after dropping the smallest-|lambda| value
/// and the `layers` largest. The input need not be sorted.
BulkEstimate bulk_median_gradient(std::span<const double> ritz_values, std::size_t layers);

struct OutlierReport {
  std::size_t count = 0;
  std::vector<double> values;  ///< descending
  double threshold = 0.0;
  /// Block heuristic only: false when max 2 sigma sqrt(n) >= min n mu.
  bool separated = true;
};

/// Relative gaps (lambda_i - lambda_{i+1}) / lambda_1 over the values sorted
/// descending; the count is the largest i whose gap reaches `threshold`.
OutlierReport count_outliers_gap(std::span<const double> ritz_values, double threshold);

struct LayerBlock {
  std::size_t size = 1;
  double mean = 0.0;
  double stddev = 0.0;
};

using LayerBlockSpec = std::vector<LayerBlock>;

/// One outlier n_l mu_l per block when the blocks are separated from the
/// noise, i.e. max_l 2 sigma_l sqrt(n_l) < min_l n_l mu_l.
OutlierReport predict_outliers_from_blocks(const LayerBlockSpec& spec);

/// Block-diagonal symmetric matrix whose block l has i.i.d. entries
/// N(mu_l, sigma_l^2) on and above the diagonal.
DenseSymmetric block_diagonal_matrix(const LayerBlockSpec& spec, SeedStream& stream);

}  // namespace curvlens
