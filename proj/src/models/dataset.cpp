#include "curvlens/dataset.hpp"

#include <cmath>
#include <numeric>

#include "curvlens/error.hpp"
#include "json.hpp"

namespace curvlens {

void Dataset::validate() const {
  if (n_samples == 0 || d_in == 0 || n_classes == 0) throw InvalidArgument("dataset: empty shape");
  if (inputs.size() != n_samples * d_in || labels.size() != n_samples) {
    throw InvalidArgument("dataset: storage does not match shape");
  }
  for (double x : inputs) {
    if (!std::isfinite(x)) throw InvalidArgument("dataset: non-finite input");
  }
  std::vector<std::size_t> seen(n_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
      throw InvalidArgument("dataset: label out of range");
    }
    ++seen[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (seen[c] == 0) throw InvalidArgument("dataset: class " + std::to_string(c) + " has no samples");
  }
}

DatasetSpec DatasetSpec::from_json(const std::string& text) {
  DatasetSpec spec;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    spec.n_samples = j.at("n_samples").get<std::size_t>();
    spec.d_in = j.at("d_in").get<std::size_t>();
    spec.n_classes = j.at("n_c").get<std::size_t>();
    spec.blob_separation = j.at("blob_separation").get<double>();
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.n_test = j.value("n_test", std::size_t{0});
    spec.input_offset = j.value("input_offset", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset spec JSON: ") + e.what());
  }
  return spec;
}

std::string DatasetSpec::to_json() const {
  nlohmann::ordered_json j;
  j["n_samples"] = n_samples;
  j["d_in"] = d_in;
  j["n_c"] = n_classes;
  j["blob_separation"] = blob_separation;
  j["seed"] = seed;
  j["n_test"] = n_test;
  j["input_offset"] = input_offset;
  return j.dump(2);
}

namespace {

Dataset draw_points(const std::vector<double>& centers, std::size_t n, std::size_t d,
                    std::size_t classes, double offset, SeedStream& stream) {
  Dataset out;
  out.n_samples = n;
  out.d_in = d;
  out.n_classes = classes;
  out.inputs.resize(n * d);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    out.labels[i] = static_cast<int>(c);
    for (std::size_t k = 0; k < d; ++k) out.inputs[i * d + k] = centers[c * d + k] + stream.normal() + offset;
  }
  return out;
}

}  // namespace

BlobData make_blobs(const DatasetSpec& spec) {
  if (spec.n_classes < 2) throw InvalidArgument("make_blobs: need at least two classes");
  if (spec.d_in == 0) throw InvalidArgument("make_blobs: d_in must be positive");
  if (spec.n_samples < spec.n_classes) {
    throw InvalidArgument("make_blobs: fewer samples than classes");
  }
  if (spec.n_test != 0 && spec.n_test < spec.n_classes) {
    throw InvalidArgument("make_blobs: fewer test samples than classes");
  }
  if (!(spec.blob_separation >= 0.0)) throw InvalidArgument("make_blobs: negative separation");
  if (!std::isfinite(spec.input_offset)) throw InvalidArgument("make_blobs: non-finite offset");

  SeedStream root(spec.seed);
  SeedStream center_stream = root.split();
  SeedStream train_stream = root.split();
  SeedStream test_stream = root.split();

  const double scale = spec.blob_separation / std::sqrt(static_cast<double>(spec.d_in));
  std::vector<double> centers(spec.n_classes * spec.d_in);
  for (double& c : centers) c = scale * center_stream.normal();

  BlobData out;
  out.train = draw_points(centers, spec.n_samples, spec.d_in, spec.n_classes,
                          spec.input_offset, train_stream);
  if (spec.n_test > 0) {
    out.test = draw_points(centers, spec.n_test, spec.d_in, spec.n_classes,
                           spec.input_offset, test_stream);
  }
  return out;
}

Batch full_batch(const Dataset& data) {
  Batch b;
  b.data = &data;
  b.rows.resize(data.n_samples);
  std::iota(b.rows.begin(), b.rows.end(), std::size_t{0});
  return b;
}

Batch sample_batch(const Dataset& data, std::size_t size, SeedStream& stream,
                   bool with_replacement) {
  if (size == 0) throw InvalidArgument("sample_batch: batch size must be positive");
  Batch b;
  b.data = &data;
  if (with_replacement) {
    b.rows.resize(size);
    for (std::size_t& r : b.rows) r = stream.below(data.n_samples);
    return b;
  }
  if (size > data.n_samples) throw InvalidArgument("sample_batch: batch larger than dataset");
  std::vector<std::size_t> idx(data.n_samples);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + stream.below(data.n_samples - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(size);
  b.rows = std::move(idx);
  return b;
}

}  // namespace curvlens
