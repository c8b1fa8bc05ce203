#include "curvlens/random.hpp"

#include <cmath>
#include <numbers>

#include "curvlens/error.hpp"

namespace curvlens {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

SeedStream::SeedStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

std::uint64_t SeedStream::next_u64() { return engine_(); }

double SeedStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeedStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double SeedStream::normal() {
  if (spare_normal_) {
    const double z = *spare_normal_;
    spare_normal_.reset();
    return z;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(angle);
  return r * std::cos(angle);
}

double SeedStream::rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

std::uint64_t SeedStream::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("SeedStream::below: empty range");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

SeedStream SeedStream::split() { return SeedStream(splitmix64(next_u64())); }

std::string_view to_string(ProbeKind kind) {
  return kind == ProbeKind::rademacher ? "rademacher" : "gaussian";
}

ProbeKind parse_probe_kind(std::string_view name) {
  if (name == "rademacher") return ProbeKind::rademacher;
  if (name == "gaussian") return ProbeKind::gaussian;
  throw InvalidArgument("unknown probe kind: " + std::string(name));
}

double probe_fourth_moment(ProbeKind kind) { return kind == ProbeKind::rademacher ? 1.0 : 3.0; }

Vector probe_vector(SeedStream& stream, std::size_t dim, ProbeKind kind) {
  if (dim == 0) throw InvalidArgument("probe_vector: dimension must be positive");
  Vector v(dim);
  if (kind == ProbeKind::rademacher) {
    for (double& x : v) x = stream.rademacher();
  } else {
    for (double& x : v) x = stream.normal();
  }
  return v;
}

}  // namespace curvlens
