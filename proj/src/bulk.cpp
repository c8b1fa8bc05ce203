#include "curvlens/bulk.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "curvlens/error.hpp"

namespace curvlens {

std::string_view to_string(BulkMethod method) {
  switch (method) {
    case BulkMethod::random_vector_weighted: return "random_vector_weighted";
    case BulkMethod::gradient_median: return "gradient_median";
  }
  return "unknown";
}

namespace {

std::size_t smallest_magnitude_index(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) < std::abs(v[best])) best = i;
  }
  return best;
}

}  // namespace

BulkEstimate bulk_mean_random_vector(const DiracMixture& d, std::size_t layers) {
  const std::vector<Atom>& atoms = d.atoms();
  if (atoms.size() <= layers + 2) {
    throw InvalidArgument("bulk_mean_random_vector: need more than " + std::to_string(layers + 2) +
                          " atoms, got " + std::to_string(atoms.size()));
  }
  std::vector<double> values(atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) values[i] = atoms[i].value;
  const std::size_t ghost = smallest_magnitude_index(values);

  // Atoms are sorted ascending, so the top `layers` are the tail.
  const std::size_t end = atoms.size() - layers;
  double mass = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < end; ++i) {
    if (i == ghost) continue;
    mass += atoms[i].weight;
    sum += atoms[i].weight * atoms[i].value;
  }
  if (ghost >= end) {
    // The smallest-|lambda| atom was already among the dropped top atoms.
    throw InvalidArgument("bulk_mean_random_vector: smallest-magnitude atom lies among the top atoms");
  }
  if (!(mass > 0.0)) throw InvalidArgument("bulk_mean_random_vector: remaining atoms carry no weight");
  return {sum / mass, 1, layers, BulkMethod::random_vector_weighted};
}

BulkEstimate bulk_median_gradient(std::span<const double> ritz_values, std::size_t layers) {
  if (ritz_values.size() <= layers + 2) {
    throw InvalidArgument("bulk_median_gradient: need more than " + std::to_string(layers + 2) +
                          " values, got " + std::to_string(ritz_values.size()));
  }
  std::vector<double> v(ritz_values.begin(), ritz_values.end());
  v.erase(v.begin() + static_cast<std::ptrdiff_t>(smallest_magnitude_index(v)));
  std::sort(v.begin(), v.end());
  v.resize(v.size() - layers);
  const std::size_t n = v.size();
  const double median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {median, 1, layers, BulkMethod::gradient_median};
}

OutlierReport count_outliers_gap(std::span<const double> ritz_values, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidArgument("count_outliers_gap: threshold must lie in (0, 1)");
  }
  if (ritz_values.empty()) throw InvalidArgument("count_outliers_gap: no values");
  std::vector<double> v(ritz_values.begin(), ritz_values.end());
  std::sort(v.begin(), v.end(), std::greater<>());
  if (!(v.front() > 0.0)) {
    throw InvalidArgument("count_outliers_gap: largest value must be positive");
  }
  OutlierReport report;
  report.threshold = threshold;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if ((v[i] - v[i + 1]) / v.front() >= threshold) report.count = i + 1;
  }
  report.values.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(report.count));
  return report;
}

OutlierReport predict_outliers_from_blocks(const LayerBlockSpec& spec) {
  if (spec.empty()) throw InvalidArgument("predict_outliers_from_blocks: no blocks");
  double noise = 0.0;
  double smallest_signal = INFINITY;
  OutlierReport report;
  for (const LayerBlock& b : spec) {
    if (b.size < 1) throw InvalidArgument("predict_outliers_from_blocks: empty block");
    if (!(b.mean > 0.0)) {
      throw InvalidArgument("predict_outliers_from_blocks: block means must be positive");
    }
    if (b.stddev < 0.0) throw InvalidArgument("predict_outliers_from_blocks: negative stddev");
    const double n = static_cast<double>(b.size);
    noise = std::max(noise, 2.0 * b.stddev * std::sqrt(n));
    smallest_signal = std::min(smallest_signal, n * b.mean);
    report.values.push_back(n * b.mean);
  }
  std::sort(report.values.begin(), report.values.end(), std::greater<>());
  report.separated = noise < smallest_signal;
  report.count = report.separated ? spec.size() : 0;
  return report;
}

DenseSymmetric block_diagonal_matrix(const LayerBlockSpec& spec, SeedStream& stream) {
  std::size_t dim = 0;
  for (const LayerBlock& b : spec) dim += b.size;
  if (dim == 0) throw InvalidArgument("block_diagonal_matrix: no entries");
  std::vector<double> a(dim * dim, 0.0);
  std::size_t offset = 0;
  for (const LayerBlock& b : spec) {
    for (std::size_t i = 0; i < b.size; ++i) {
      for (std::size_t j = i; j < b.size; ++j) {
        const double x = b.mean + b.stddev * stream.normal();
        a[(offset + i) * dim + offset + j] = x;
        a[(offset + j) * dim + offset + i] = x;
      }
    }
    offset += b.size;
  }
  return DenseSymmetric::from_row_major(dim, std::move(a));
}

}  // namespace curvlens
