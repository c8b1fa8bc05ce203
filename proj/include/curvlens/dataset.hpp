#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "curvlens/random.hpp"

namespace curvlens {

/// Classification data: inputs row-major n_samples x d_in, integer labels.
struct Dataset {
  std::size_t n_samples = 0;
  std::size_t d_in = 0;
  std::size_t n_classes = 0;
  std::vector<double> inputs;
  std::vector<int> labels;

  std::span<const double> row(std::size_t i) const { return {inputs.data() + i * d_in, d_in}; }
  /// Throws unless entries are finite, labels lie in range and every class appears.
  void validate() const;
};

/// Gaussian blobs: class centers drawn N(0, separation^2 / d_in) per
/// coordinate, points at center + N(0, 1) + input_offset. Labels cycle
/// through the classes.
struct DatasetSpec {
  std::size_t n_samples = 1000;
  std::size_t d_in = 20;
  std::size_t n_classes = 10;
  double blob_separation = 3.0;
  std::uint64_t seed = 0;
  /// Held-out points drawn from the same centers (0 disables).
  std::size_t n_test = 0;
  /// Constant added to every input coordinate, like the mean of raw pixel data.
  double input_offset = 0.0;

  static DatasetSpec from_json(const std::string& text);
  std::string to_json() const;
};

struct BlobData {
  Dataset train;
  Dataset test;
};

BlobData make_blobs(const DatasetSpec& spec);

/// A view of selected rows of a dataset.
struct Batch {
  const Dataset* data = nullptr;
  std::vector<std::size_t> rows;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
};

Batch full_batch(const Dataset& data);
/// Uniform minibatch. Without replacement the rows are distinct.
Batch sample_batch(const Dataset& data, std::size_t size, SeedStream& stream,
                   bool with_replacement = false);

}  // namespace curvlens
