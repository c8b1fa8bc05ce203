#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curvlens/operator.hpp"

namespace curvlens {

/// Symmetric tridiagonal matrix: diagonal `alphas` (m), off-diagonal `betas` (m-1).
struct Tridiagonal {
  Vector alphas;
  Vector betas;

  std::size_t steps() const noexcept { return alphas.size(); }
};

/// Column-major dim x count block of vectors.
class Basis {
 public:
  Basis() = default;
  Basis(std::size_t dim, std::size_t capacity);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }
  std::span<const double> column(std::size_t i) const;
  std::span<double> column(std::size_t i);
  std::span<const double> data() const noexcept { return {data_.data(), dim_ * count_}; }
  void append(std::span<const double> v);
  void resize(std::size_t count);

  /// max |V'V - I|.
  double orthogonality_loss() const;

 private:
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::vector<double> data_;
};

struct LanczosOptions {
  bool reorthogonalize = true;
  /// Return the Krylov basis V (needed for Ritz vectors).
  bool keep_basis = true;
};

struct LanczosRun {
  Tridiagonal tridiagonal;
  std::optional<Basis> basis;
  std::size_t requested_steps = 0;
  bool breakdown = false;
  std::string label;
};

/// m-step Lanczos started from `seed` (normalized internally).
///
/// With reorthogonalization each new residual is projected twice against
/// every stored basis vector. A residual norm below 1e-12 times the running
/// max of |alpha|, |beta| is treated as an invariant subspace: the run stops
/// with the completed steps and `breakdown` set.
LanczosRun lanczos_run(const SymmetricOperator& op, std::size_t steps,
                       std::span<const double> seed, const LanczosOptions& options = {});

/// Independent runs advanced in lockstep so each step costs one block apply.
/// Results are identical to calling lanczos_run per seed.
std::vector<LanczosRun> lanczos_run_batch(const SymmetricOperator& op, std::size_t steps,
                                          std::span<const Vector> seeds,
                                          const LanczosOptions& options = {});

struct TridiagonalEigen {
  std::size_t dim = 0;
  Vector values;                ///< ascending
  std::vector<double> vectors;  ///< column-major, column i for values[i]
};

/// Implicit QL with Wilkinson shifts.
TridiagonalEigen tridiagonal_eigen(const Tridiagonal& t);

struct RitzDecomposition {
  Vector values;   ///< Ritz values, ascending
  Vector weights;  ///< Gauss quadrature weights: squared first eigenvector components
  std::optional<Basis> vectors;  ///< Ritz vectors V z_i, column i for values[i]
  std::size_t steps = 0;
  std::size_t requested_steps = 0;
  std::string seed_kind = "custom";
  std::string label;
};

RitzDecomposition ritz_decompose(const LanczosRun& run, bool with_vectors = true);

/// |sum_i w_i theta_i^k - v'H^k v| / max(1, |v'H^k v|) with v the normalized seed.
/// Gauss quadrature with m nodes is exact up to degree 2m-1; larger k throws.
double moment_match_check(const SymmetricOperator& op, const RitzDecomposition& ritz,
                          std::span<const double> seed, int k);

/// Chebyshev polynomial of the first kind by three-term recurrence.
double chebyshev_t(std::size_t order, double x);

struct BoundRatio {
  double lanczos;  ///< 1 / c_{m-1}(1 + 2 rho)^2
  double power;    ///< (lambda2 / lambda1)^{2(m-1)}
};

/// Gap-dependent factors in the Lanczos and power-iteration lower bounds for
/// lambda_1, normalized so lambda_2 = 1 and lambda_n = 0 (rho = gap - 1).
BoundRatio chebyshev_bound_ratio(double gap, std::size_t steps);

}  // namespace curvlens
