#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "curvlens/operator.hpp"
#include "curvlens/spectral_density.hpp"

namespace curvlens {

/// Marcenko-Pastur law for (1/T) X X' with X of size P x T, entries of
/// variance sigma^2, and ratio q = P / T.
class MPParams {
 public:
  /// q = 0 is accepted as the degenerate point-mass limit.
  MPParams(double variance, double ratio);

  double variance() const noexcept { return variance_; }
  double ratio() const noexcept { return ratio_; }
  double lower_edge() const noexcept;
  double upper_edge() const noexcept;
  /// Mass of the atom at zero: max(0, 1 - 1/q).
  double zero_mass() const noexcept;

 private:
  double variance_;
  double ratio_;
};

/// Density of the continuous part; integrates to 1 - zero_mass.
double mp_density(double x, const MPParams& params);

/// Semicircle density (1/2pi) sqrt(4 - x^2) on [-2, 2].
double wigner_density(double x);

/// Symmetric matrix with i.i.d. N(0,1) entries on and above the diagonal.
/// `normalized` divides by sqrt(P) so the spectrum approaches [-2, 2].
DenseSymmetric sample_wigner(std::size_t dim, SeedStream& stream, bool normalized = true);

/// (1/T) X X' with X of size P x T, entries N(0,1).
DenseSymmetric sample_wishart(std::size_t dim, std::size_t samples, SeedStream& stream);

struct SpectrumGroup {
  enum class Kind { uniform, constant };
  std::size_t count = 0;
  Kind kind = Kind::uniform;
  double lo = 0.0;
  double hi = 0.0;  ///< ignored for constant groups
};

struct PlantedSpectrumSpec {
  std::size_t dim = 0;
  std::vector<SpectrumGroup> groups;
  std::uint64_t rotation_seed = 0;

  void validate() const;
  /// Parses {"dim", "groups": [{"count", "dist": "uniform"|"const", "lo", "hi"}], "seed"}.
  static PlantedSpectrumSpec from_json(const std::string& text);
  std::string to_json() const;
};

struct PlantedMatrix {
  DenseSymmetric matrix;
  Vector spectrum;  ///< ascending
};

/// Eigenvalues are drawn from `stream` group by group; the rotation U comes
/// from Gram-Schmidt on Gaussian columns seeded by spec.rotation_seed and
/// H = U diag(D) U'. With `rotate == false`, H = diag(D).
PlantedMatrix planted_matrix(const PlantedSpectrumSpec& spec, SeedStream& stream,
                             bool rotate = true);

/// Orthonormal columns from two-pass block Gram-Schmidt on an n x k Gaussian
/// matrix (column-major). Columns that collapse numerically are redrawn.
std::vector<double> random_orthonormal(std::size_t n, std::size_t k, SeedStream& stream);

/// Fits MP to what remains after removing `zero_modes` smallest-|lambda| atoms
/// and the `outliers` largest atoms: sigma^2 is the remaining weighted mean and
/// q solves sigma^2 (1 + sqrt(q))^2 = largest remaining atom.
MPParams fit_mp_to_bulk(const DiracMixture& d, std::size_t outliers, std::size_t zero_modes);

struct OverlapCleaning {
  Vector cleaned;               ///< xi_i = sum_j <u_i|uhat_j>^2 lambda_j
  std::vector<double> overlap;  ///< row-major P x P; row i for true eigenvector u_i
  std::size_t dim = 0;
};

/// Rotationally-invariant cleaning: true eigenvectors u_i of `truth` against
/// the eigenpairs (uhat_j, lambda_j) of `empirical`. Oracle scale (P <= 500).
OverlapCleaning rie_clean(const DenseSymmetric& truth, const DenseSymmetric& empirical);

}  // namespace curvlens
