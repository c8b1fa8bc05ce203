#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "curvlens/lanczos.hpp"
#include "curvlens/operator.hpp"

namespace curvlens {

struct Atom {
  double value;
  double weight;
};

struct MixtureInfo {
  std::size_t seeds = 1;
  std::size_t steps = 0;
  std::string label;
};

/// Discrete spectral density sum_i w_i delta(lambda - lambda_i).
///
/// Atoms are kept sorted by location; locations closer than 1e-12 are merged
/// and the weights are normalized to sum to one.
class DiracMixture {
 public:
  static constexpr double kMergeTolerance = 1e-12;

  DiracMixture() = default;
  DiracMixture(std::vector<Atom> atoms, MixtureInfo info = {});

  /// Uniform weights 1/P on the given eigenvalues.
  static DiracMixture from_spectrum(std::span<const double> eigenvalues, std::string label = {});
  static DiracMixture from_ritz(const RitzDecomposition& ritz);

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const MixtureInfo& info() const noexcept { return info_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }
  double min_value() const;
  double max_value() const;

 private:
  std::vector<Atom> atoms_;
  MixtureInfo info_;
};

/// Averages the quadrature measures of several Lanczos runs, each weighted 1/n_v.
DiracMixture average_over_seeds(std::span<const RitzDecomposition> runs);

/// sum_i w_i lambda_i^k
double mixture_moment(const DiracMixture& d, int k);

struct KernelSpec {
  double bandwidth;  ///< standard deviation of the Gaussian kernel

  explicit KernelSpec(double sigma);
  /// E[x^order] of the centered kernel: sigma^order (order-1)!! for even order, 0 for odd.
  double central_moment(int order) const;
};

/// k-th moment of the kernel-smoothed mixture, from the binomial expansion
/// of (x + lambda_i)^k against the kernel's even central moments.
double smoothed_moment(const DiracMixture& d, const KernelSpec& kernel, int k);

/// smoothed_moment - mixture_moment.
double smoothing_bias(const DiracMixture& d, const KernelSpec& kernel, int k);

struct TraceEstimate {
  double value = 0.0;
  Vector per_probe;
  std::size_t probes = 0;
  /// (2 + m4) Tr(H^{2k}); the Tr term is estimated from one extra probe.
  double variance_bound = 0.0;
};

/// Hutchinson estimate of Tr(H^k) from n_v probes. Probes are drawn in order
/// from `stream`; per-probe quadratic forms are evaluated concurrently and
/// stored by probe index.
TraceEstimate stochastic_trace(const SymmetricOperator& op, int k, std::size_t probes,
                               SeedStream& stream, ProbeKind kind = ProbeKind::rademacher);

}  // namespace curvlens
