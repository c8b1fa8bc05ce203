#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curvlens/lanczos.hpp"
#include "curvlens/optim.hpp"
#include "curvlens/rmt.hpp"
#include "curvlens/spectral_density.hpp"

namespace curvlens {

/// Shortest decimal string that parses back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double x);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

struct SpectrumFile {
  static constexpr int kSchemaVersion = 1;

  struct OperatorInfo {
    std::string kind;
    std::size_t dim = 0;
    std::string label;
  };
  struct LanczosInfo {
    std::size_t steps = 0;
    std::size_t seeds = 0;
    std::string probe_kind;
  };
  struct OutlierInfo {
    std::size_t count = 0;
    double threshold = 0.0;
    std::vector<double> values;
  };
  struct MPFit {
    double variance = 0.0;
    double ratio = 0.0;
    double lower_edge = 0.0;
    double upper_edge = 0.0;
    double zero_mass = 0.0;
  };
  struct Analysis {
    std::optional<double> lambda_max;
    std::optional<double> lambda_b_random_vector;
    std::optional<double> lambda_b_gradient_median;
    std::optional<OutlierInfo> outliers;
    std::optional<MPFit> mp_fit;
  };

  OperatorInfo op;
  LanczosInfo lanczos;
  std::vector<Atom> atoms;
  Analysis analysis;
  /// Path of the Ritz-vector sidecar, relative to the spectrum file's directory.
  std::optional<std::string> ritz_vectors;

  DiracMixture mixture() const;
  std::string to_json() const;
  /// Rejects other schema versions, unsorted atoms, or weights not summing to 1 within 1e-9.
  static SpectrumFile from_json(const std::string& text);
};

SpectrumFile::MPFit to_fit(const MPParams& params);

/// Binary sidecar holding Ritz values, weights and vectors of one decomposition.
void write_ritz_vectors(const std::string& path, const RitzDecomposition& ritz);
RitzDecomposition read_ritz_vectors(const std::string& path);

std::string stem_csv(const DiracMixture& d);
/// Equal-width histogram of eigenvalues with columns bin_lo, bin_hi, count, density.
std::string histogram_csv(const std::vector<double>& eigenvalues, std::size_t bins);
std::string train_trace_csv(const TrainTrace& trace);
std::string landscape_csv(const LossLandscape& landscape);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> flags;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
  std::vector<std::string> artifacts;
  std::vector<std::string> warnings;
  bool diverged = false;

  std::string to_json() const;
};

}  // namespace curvlens
