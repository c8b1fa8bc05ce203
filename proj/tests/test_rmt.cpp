#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "curvlens/error.hpp"
#include "curvlens/kernels.hpp"
#include "curvlens/lanczos.hpp"
#include "curvlens/rmt.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace curvlens;

namespace {

double mean_of(const Vector& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Closed-form MP density written out independently of the library.
double mp_reference(double x, double s2, double q) {
  const double lo = s2 * (1 - std::sqrt(q)) * (1 - std::sqrt(q));
  const double hi = s2 * (1 + std::sqrt(q)) * (1 + std::sqrt(q));
  if (x <= lo || x >= hi) return 0.0;
  return std::sqrt((hi - x) * (x - lo)) / (2 * std::numbers::pi * s2 * q * x);
}

}  // namespace

TEST_CASE("MP parameters and edges") {
  const MPParams p(1.0, 2.0);
  CHECK(p.lower_edge() == doctest::Approx(0.17157287525).epsilon(1e-10));
  CHECK(p.upper_edge() == doctest::Approx(5.82842712475).epsilon(1e-10));
  CHECK(p.zero_mass() == doctest::Approx(0.5));
  CHECK(MPParams(1.0, 0.5).zero_mass() == 0.0);
  CHECK(MPParams(1.0, 1.0).zero_mass() == 0.0);
  CHECK_THROWS_AS(MPParams(0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(MPParams(-1.0, 1.0), InvalidArgument);
  CHECK(mp_density(1.0, MPParams(1.0, 0.5)) == doctest::Approx(mp_reference(1.0, 1.0, 0.5)).epsilon(1e-14));
}

TEST_CASE("limiting densities") {
  CHECK(wigner_density(0.0) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
  CHECK(wigner_density(3.0) == 0.0);
  CHECK(wigner_density(-2.5) == 0.0);
  CHECK(oracle::integrate(wigner_density, -2.0, 2.0, 64, 1e-10) == doctest::Approx(1.0).epsilon(1e-6));

  for (double q : {0.25, 0.5, 2.0, 4.0}) {
    const MPParams p(1.3, q);
    const auto f = [&](double x) { return mp_density(x, p); };
    const double mass = oracle::integrate(f, p.lower_edge(), p.upper_edge(), 256, 1e-10);
    CHECK(std::abs(mass - (1.0 - p.zero_mass())) < 1e-4);
    CHECK(mp_density(p.upper_edge() + 0.1, p) == 0.0);
    CHECK(mp_density(p.lower_edge() * 0.5, p) == 0.0);
  }
}

TEST_CASE("Wigner samples") {
  SUBCASE("semicircle moments and edge at P = 2000") {
    SeedStream s(21);
    const EigenDecomposition e = dense_eigendecomposition(sample_wigner(2000, s), false);
    double m2 = 0.0;
    for (double v : e.values) m2 += v * v / 2000.0;
    CHECK(m2 >= 0.95);
    CHECK(m2 <= 1.05);
    const double edge = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
    CHECK(edge >= 1.9);
    CHECK(edge <= 2.2);
  }
  SUBCASE("reproducible") {
    SeedStream a(5), b(5);
    CHECK(sample_wigner(2, a).entries().size() == 4);
    SeedStream c(5);
    const DenseSymmetric x = sample_wigner(2, c), y = sample_wigner(2, b);
    CHECK(std::equal(x.entries().begin(), x.entries().end(), y.entries().begin()));
  }
  SUBCASE("unnormalized: Frobenius identity and diagonal inadequacy") {
    SeedStream s(22);
    const DenseSymmetric w = sample_wigner(500, s, false);
    const EigenDecomposition e = dense_eigendecomposition(w, false);
    double m2 = 0.0;
    for (double v : e.values) m2 += v * v / 500.0;
    CHECK(m2 >= 0.9 * 500);
    CHECK(m2 <= 1.1 * 500);
    double diag = 0.0;
    for (double d : w.diagonal()) diag = std::max(diag, std::abs(d));
    const double lam = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
    CHECK(diag < 0.25 * lam);
  }
  CHECK_THROWS_AS([] { SeedStream s(1); return sample_wigner(1, s); }(), InvalidArgument);
}

TEST_CASE("Wishart samples") {
  SeedStream s(23);
  SUBCASE("T = P/2 has exactly half zero eigenvalues") {
    const DenseSymmetric y = sample_wishart(100, 50, s);
    const EigenDecomposition e = dense_eigendecomposition(y, false);
    const auto zeros = std::count_if(e.values.begin(), e.values.end(), [](double v) { return std::abs(v) < 1e-8; });
    CHECK(zeros == 50);
    CHECK(e.values.front() > -1e-8);
    const Vector d = y.diagonal();
    CHECK(std::abs(mean_of(d) - 1.0) < 0.05);
  }
  SUBCASE("T = 2P is positive definite") {
    const EigenDecomposition e = dense_eigendecomposition(sample_wishart(100, 200, s), false);
    CHECK(e.values.front() > 0.0);
  }
  SUBCASE("zero mass matches 1 - T/P and the trace is near P") {
    for (auto [p, t] : {std::pair<std::size_t, std::size_t>{200, 50}, {200, 150}, {200, 400}}) {
      const DenseSymmetric y = sample_wishart(p, t, s);
      const EigenDecomposition e = dense_eigendecomposition(y, false);
      const auto zeros = std::count_if(e.values.begin(), e.values.end(), [](double v) { return std::abs(v) < 1e-8; });
      const double expected = std::max(0.0, 1.0 - static_cast<double>(t) / static_cast<double>(p));
      CHECK(static_cast<double>(zeros) / static_cast<double>(p) == doctest::Approx(expected));
      CHECK(std::abs(mean_of(e.values) - 1.0) < 0.05);
    }
  }
}

TEST_CASE("planted spectra") {
  PlantedSpectrumSpec spec;
  spec.dim = 1000;
  spec.groups = {{500, SpectrumGroup::Kind::constant, 0.0, 0.0},
                 {470, SpectrumGroup::Kind::uniform, 0.0, 15.0},
                 {20, SpectrumGroup::Kind::uniform, 0.0, 60.0},
                 {10, SpectrumGroup::Kind::uniform, -10.0, 0.0}};
  spec.rotation_seed = 99;

  SUBCASE("rotated matrix has the drawn spectrum") {
    SeedStream s(24);
    const PlantedMatrix p = planted_matrix(spec, s);
    CHECK(p.spectrum.front() >= -10.0);
    CHECK(p.spectrum.back() <= 60.0);
    CHECK(std::is_sorted(p.spectrum.begin(), p.spectrum.end()));
    const EigenDecomposition e = dense_eigendecomposition(p.matrix, false);
    for (std::size_t i = 0; i < 1000; ++i) CHECK(std::abs(e.values[i] - p.spectrum[i]) < 1e-8);
    // The rotation spreads mass off the diagonal.
    double offdiag = 0.0;
    for (std::size_t j = 1; j < 1000; ++j) offdiag += std::abs(p.matrix.entries()[j]);
    CHECK(offdiag > 1.0);
  }
  SUBCASE("unrotated path is diagonal") {
    SeedStream s(24);
    const PlantedMatrix p = planted_matrix(spec, s, false);
    Vector d = p.matrix.diagonal();
    std::sort(d.begin(), d.end());
    CHECK(d == p.spectrum);
    CHECK(p.matrix.frobenius_squared() == doctest::Approx(kernels::dot(d, d)).epsilon(1e-14));
  }
  SUBCASE("same seeds reproduce the matrix") {
    SeedStream a(3), b(3);
    spec.dim = 60;
    spec.groups = {{60, SpectrumGroup::Kind::uniform, 1.0, 2.0}};
    const PlantedMatrix x = planted_matrix(spec, a), y = planted_matrix(spec, b);
    CHECK(std::equal(x.matrix.entries().begin(), x.matrix.entries().end(), y.matrix.entries().begin()));
  }
  SUBCASE("validation and JSON") {
    PlantedSpectrumSpec bad = spec;
    bad.groups[0].count = 499;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    const PlantedSpectrumSpec back = PlantedSpectrumSpec::from_json(spec.to_json());
    CHECK(back.dim == spec.dim);
    CHECK(back.groups.size() == 4);
    CHECK(back.groups[2].hi == 60.0);
    CHECK(back.rotation_seed == 99);
    const PlantedSpectrumSpec c = PlantedSpectrumSpec::from_json(
        R"({"dim": 3, "groups": [{"count": 3, "dist": "const", "value": 2}], "seed": 1})");
    CHECK(c.groups[0].kind == SpectrumGroup::Kind::constant);
    CHECK(c.groups[0].lo == 2.0);
    CHECK_THROWS_AS(PlantedSpectrumSpec::from_json("{\"dim\": 3, \"groups\": [{\"count\": 3, \"dist\": \"beta\"}]}"),
                    FormatError);
    CHECK_THROWS_AS(PlantedSpectrumSpec::from_json("not json"), FormatError);
  }
}

TEST_CASE("random orthonormal columns") {
  SeedStream s(25);
  const std::size_t n = 150, k = 140;
  const std::vector<double> q = random_orthonormal(n, k, s);
  double worst = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      double d = 0.0;
      for (std::size_t r = 0; r < n; ++r) d += q[i * n + r] * q[j * n + r];
      worst = std::max(worst, std::abs(d - (i == j ? 1.0 : 0.0)));
    }
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(random_orthonormal(3, 4, s), InvalidArgument);
}

TEST_CASE("fit_mp_to_bulk") {
  SUBCASE("quantized MP atoms recover the variance") {
    // Atoms at the midpoint quantiles of MP(1, 0.5), from a fine CDF table.
    const double s2 = 1.0, q = 0.5;
    const double lo = s2 * std::pow(1 - std::sqrt(q), 2), hi = s2 * std::pow(1 + std::sqrt(q), 2);
    const int grid = 200000, atoms = 400;
    std::vector<Atom> out;
    double cdf = 0.0;
    int next = 0;
    const double h = (hi - lo) / grid;
    for (int i = 0; i < grid && next < atoms; ++i) {
      const double x = lo + (i + 0.5) * h;
      cdf += mp_reference(x, s2, q) * h;
      while (next < atoms && cdf >= (next + 0.5) / atoms) {
        out.push_back({x, 1.0});
        ++next;
      }
    }
    const MPParams fit = fit_mp_to_bulk(DiracMixture(out), 0, 0);
    CHECK(fit.variance() >= 0.95);
    CHECK(fit.variance() <= 1.05);
    CHECK(fit.ratio() == doctest::Approx(0.5).epsilon(0.1));
  }
  SUBCASE("single atom is the degenerate limit") {
    const MPParams fit = fit_mp_to_bulk(DiracMixture({{4.0, 1.0}}), 0, 0);
    CHECK(fit.variance() == 4.0);
    CHECK(fit.ratio() == 0.0);
  }
  SUBCASE("Wishart 1000 x 500 Lanczos mixture with the zero mode excluded") {
    SeedStream s(26);
    const DenseSymmetric y = sample_wishart(1000, 500, s);
    const EigenDecomposition e = dense_eigendecomposition(y, false);
    double nz = 0.0;
    std::size_t count = 0;
    for (double v : e.values) {
      if (v > 1e-8) {
        nz += v;
        ++count;
      }
    }
    nz /= static_cast<double>(count);
    const RitzDecomposition r =
        ritz_decompose(lanczos_run(as_operator(y, "wishart"), 60, probe_vector(s, 1000, ProbeKind::gaussian)));
    const MPParams fit = fit_mp_to_bulk(DiracMixture::from_ritz(r), 0, 1);
    CHECK(fit.variance() >= 0.9 * nz);
    CHECK(fit.variance() <= 1.1 * nz);
  }
  SUBCASE("removing everything is an error") {
    CHECK_THROWS_AS(fit_mp_to_bulk(DiracMixture({{1.0, 1.0}, {2.0, 1.0}}), 1, 1), InvalidArgument);
  }
}

TEST_CASE("overlap cleaning") {
  SeedStream s(27);
  const std::size_t n = 80;
  SUBCASE("identical matrices clean to themselves") {
    const DenseSymmetric w = sample_wigner(n, s);
    const OverlapCleaning c = rie_clean(w, w);
    const EigenDecomposition e = dense_eigendecomposition(w, false);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(c.cleaned[i] - e.values[i]) < 1e-10);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += c.overlap[i * n + j];
      CHECK(row == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
  SUBCASE("cleaned values are convex combinations of empirical eigenvalues") {
    const DenseSymmetric truth = DenseSymmetric::identity(n);
    const DenseSymmetric emp = sample_wishart(n, 2 * n, s);
    const OverlapCleaning c = rie_clean(truth, emp);
    const EigenDecomposition e = dense_eigendecomposition(emp, false);
    for (double v : c.cleaned) {
      CHECK(v <= e.values.back() + 1e-12);
      CHECK(v >= e.values.front() - 1e-12);
    }
  }
  SUBCASE("rank-one truth plus noise lifts the smallest value") {
    DenseSymmetric truth(n);
    const Vector u = probe_vector(s, n, ProbeKind::gaussian);
    const double nu = kernels::dot(u, u);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) truth.set(i, j, 10.0 * u[i] * u[j] / nu);
    DenseSymmetric emp = truth;
    const DenseSymmetric noise = sample_wigner(n, s);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) emp.set(i, j, truth.entries()[i * n + j] + 0.5 * noise.entries()[i * n + j]);
    const OverlapCleaning c = rie_clean(truth, emp);
    const EigenDecomposition e = dense_eigendecomposition(emp, false);
    CHECK(*std::min_element(c.cleaned.begin(), c.cleaned.end()) >= e.values.front());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(rie_clean(DenseSymmetric::identity(3), DenseSymmetric::identity(4)), InvalidArgument);
    CHECK_THROWS_AS(rie_clean(DenseSymmetric::identity(501), DenseSymmetric::identity(501)), InvalidArgument);
  }
}
