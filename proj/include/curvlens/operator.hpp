#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "curvlens/random.hpp"

namespace curvlens {

/// A symmetric linear map known only through its action on vectors.
///
/// Instances are immutable once built; `apply` may be called concurrently.
/// An optional block apply maps several vectors at once (row-major dim x k
/// blocks) and lets batched Lanczos share one pass over dense storage.
class SymmetricOperator {
 public:
  using Apply = std::function<void(std::span<const double>, std::span<double>)>;
  using BlockApply =
      std::function<void(std::span<const double>, std::span<double>, std::size_t)>;

  SymmetricOperator(std::size_t dim, Apply apply, std::string label,
                    BlockApply block_apply = {});

  std::size_t dim() const noexcept { return dim_; }
  const std::string& label() const noexcept { return label_; }

  void apply(std::span<const double> v, std::span<double> out) const;
  Vector apply(std::span<const double> v) const;

  /// Y = H X for k row-major vectors. Falls back to k single applies.
  void apply_block(std::span<const double> x, std::span<double> y, std::size_t k) const;

 private:
  std::size_t dim_;
  Apply apply_;
  std::string label_;
  BlockApply block_apply_;
};

/// Dense symmetric matrix, row-major. Used as the brute-force oracle
/// representation and for random-matrix samples.
class DenseSymmetric {
 public:
  DenseSymmetric() = default;
  explicit DenseSymmetric(std::size_t n);

  static DenseSymmetric identity(std::size_t n);
  static DenseSymmetric diagonal(std::span<const double> d);
  /// Throws InvalidArgument unless entries[i][j] == entries[j][i] exactly.
  static DenseSymmetric from_rows(const std::vector<std::vector<double>>& rows);
  static DenseSymmetric from_row_major(std::size_t n, std::vector<double> entries);

  std::size_t dim() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  /// Writes both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double value);
  std::span<const double> entries() const noexcept { return a_; }

  Vector diagonal() const;
  Vector multiply(std::span<const double> v) const;
  double frobenius_squared() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

SymmetricOperator as_operator(std::shared_ptr<const DenseSymmetric> m, std::string label);
SymmetricOperator as_operator(DenseSymmetric m, std::string label);

struct EigenDecomposition {
  std::size_t dim = 0;
  Vector values;                ///< ascending
  std::vector<double> vectors;  ///< column-major dim x dim; empty when not requested

  std::span<const double> vector(std::size_t i) const {
    return std::span<const double>(vectors).subspan(i * dim, dim);
  }
};

inline constexpr std::size_t kOracleMaxDim = 4000;

/// Full symmetric eigendecomposition (Householder tridiagonalization + QR).
/// Limited to dim <= kOracleMaxDim.
EigenDecomposition dense_eigendecomposition(const DenseSymmetric& m, bool with_vectors = true);

/// Materializes an operator column by column. Intended for small dims.
DenseSymmetric to_dense(const SymmetricOperator& op);

/// v -> (negate ? -Hv : Hv) + mu v
SymmetricOperator apply_shifted(const SymmetricOperator& op, double mu, bool negate);

/// Power-iteration estimate of the spectral norm.
double estimate_norm(const SymmetricOperator& op, SeedStream& stream, int iterations = 30);

/// max over probe pairs of |u'Hv - v'Hu| / (|u| |v| |H|_est).
double symmetry_defect(const SymmetricOperator& op, SeedStream& stream, int probes = 4);

}  // namespace curvlens
