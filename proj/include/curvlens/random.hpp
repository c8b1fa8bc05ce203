#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace curvlens {

using Vector = std::vector<double>;

/// Deterministic random source. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; uniform and normal variates are derived
/// here rather than through <random> distributions (those are
/// implementation-defined), so a seed reproduces the same numbers on every
/// platform.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; variates are produced in pairs.
  double normal();
  /// +1 or -1 with equal probability.
  double rademacher();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Child stream seeded from this one. Consumes one draw.
  SeedStream split();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

enum class ProbeKind { rademacher, gaussian };

std::string_view to_string(ProbeKind kind);
ProbeKind parse_probe_kind(std::string_view name);

/// Fourth moment of a single probe entry: 1 for Rademacher, 3 for Gaussian.
double probe_fourth_moment(ProbeKind kind);

/// i.i.d. zero-mean unit-variance entries.
Vector probe_vector(SeedStream& stream, std::size_t dim, ProbeKind kind = ProbeKind::rademacher);

}  // namespace curvlens
