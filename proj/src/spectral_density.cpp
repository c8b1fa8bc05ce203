#include "curvlens/spectral_density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "curvlens/error.hpp"
#include "curvlens/kernels.hpp"

namespace curvlens {

DiracMixture::DiracMixture(std::vector<Atom> atoms, MixtureInfo info) : info_(std::move(info)) {
  for (const Atom& a : atoms) {
    if (!std::isfinite(a.value) || !std::isfinite(a.weight)) {
      throw NumericalError("DiracMixture: non-finite atom");
    }
    if (a.weight < 0.0) throw InvalidArgument("DiracMixture: negative weight");
  }
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const Atom& a, const Atom& b) { return a.value < b.value; });
  for (const Atom& a : atoms) {
    if (!atoms_.empty() && a.value - atoms_.back().value <= kMergeTolerance) {
      atoms_.back().weight += a.weight;
    } else {
      atoms_.push_back(a);
    }
  }
  const double total = std::accumulate(atoms_.begin(), atoms_.end(), 0.0,
                                       [](double s, const Atom& a) { return s + a.weight; });
  if (!atoms_.empty()) {
    if (!(total > 0.0)) throw InvalidArgument("DiracMixture: total weight is zero");
    for (Atom& a : atoms_) a.weight /= total;
  }
}

DiracMixture DiracMixture::from_spectrum(std::span<const double> eigenvalues, std::string label) {
  std::vector<Atom> atoms;
  atoms.reserve(eigenvalues.size());
  const double w = 1.0 / static_cast<double>(eigenvalues.size());
  for (double v : eigenvalues) atoms.push_back({v, w});
  return DiracMixture(std::move(atoms), {1, eigenvalues.size(), std::move(label)});
}

DiracMixture DiracMixture::from_ritz(const RitzDecomposition& ritz) {
  std::vector<Atom> atoms;
  atoms.reserve(ritz.values.size());
  for (std::size_t i = 0; i < ritz.values.size(); ++i) {
    atoms.push_back({ritz.values[i], ritz.weights[i]});
  }
  return DiracMixture(std::move(atoms), {1, ritz.requested_steps, ritz.label});
}

double DiracMixture::min_value() const {
  if (atoms_.empty()) throw InvalidArgument("DiracMixture: empty");
  return atoms_.front().value;
}

double DiracMixture::max_value() const {
  if (atoms_.empty()) throw InvalidArgument("DiracMixture: empty");
  return atoms_.back().value;
}

DiracMixture average_over_seeds(std::span<const RitzDecomposition> runs) {
  if (runs.empty()) throw InvalidArgument("average_over_seeds: no decompositions");
  const RitzDecomposition& first = runs.front();
  std::vector<Atom> atoms;
  const double share = 1.0 / static_cast<double>(runs.size());
  for (const RitzDecomposition& r : runs) {
    if (r.label != first.label || r.requested_steps != first.requested_steps) {
      throw InvalidArgument("average_over_seeds: decompositions differ in operator or steps");
    }
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      atoms.push_back({r.values[i], r.weights[i] * share});
    }
  }
  return DiracMixture(std::move(atoms), {runs.size(), first.requested_steps, first.label});
}

double mixture_moment(const DiracMixture& d, int k) {
  if (k < 0) throw InvalidArgument("mixture_moment: negative order");
  double s = 0.0;
  for (const Atom& a : d.atoms()) s += a.weight * std::pow(a.value, k);
  return s;
}

KernelSpec::KernelSpec(double sigma) : bandwidth(sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("KernelSpec: bandwidth must be positive");
}

double KernelSpec::central_moment(int order) const {
  if (order < 0) throw InvalidArgument("KernelSpec: negative moment order");
  if (order % 2 == 1) return 0.0;
  double double_factorial = 1.0;
  for (int i = order - 1; i > 1; i -= 2) double_factorial *= i;
  return std::pow(bandwidth, order) * double_factorial;
}

namespace {

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace

double smoothing_bias(const DiracMixture& d, const KernelSpec& kernel, int k) {
  if (k < 0) throw InvalidArgument("smoothing_bias: negative order");
  const int r = (k % 2 == 0) ? k : k - 1;
  double bias = 0.0;
  for (const Atom& a : d.atoms()) {
    double term = 0.0;
    for (int j = 1; 2 * j <= r; ++j) {
      term += binomial(k, 2 * j) * kernel.central_moment(2 * j) * std::pow(a.value, k - 2 * j);
    }
    bias += a.weight * term;
  }
  return bias;
}

double smoothed_moment(const DiracMixture& d, const KernelSpec& kernel, int k) {
  return mixture_moment(d, k) + smoothing_bias(d, kernel, k);
}

TraceEstimate stochastic_trace(const SymmetricOperator& op, int k, std::size_t probes,
                               SeedStream& stream, ProbeKind kind) {
  if (k < 1) throw InvalidArgument("stochastic_trace: power must be at least 1");
  if (probes == 0) throw InvalidArgument("stochastic_trace: need at least one probe");

  std::vector<Vector> vs;
  vs.reserve(probes + 1);
  for (std::size_t p = 0; p <= probes; ++p) vs.push_back(probe_vector(stream, op.dim(), kind));

  // Evaluate v'H^k v as |H^{k/2} v|^2 (even k) or (H^{(k-1)/2} v)' H (H^{(k-1)/2} v).
  auto quadratic_form = [&](const Vector& v) {
    Vector x = v;
    for (int p = 0; p < k / 2; ++p) x = op.apply(x);
    if (k % 2 == 0) return kernels::dot(x, x);
    return kernels::dot(x, op.apply(x));
  };

  TraceEstimate out;
  out.probes = probes;
  out.per_probe.resize(probes);
  const auto n = static_cast<std::ptrdiff_t>(probes);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t p = 0; p < n; ++p) out.per_probe[p] = quadratic_form(vs[p]);
  out.value = std::accumulate(out.per_probe.begin(), out.per_probe.end(), 0.0) /
              static_cast<double>(probes);

  // E|H^k u|^2 = Tr(H^{2k}) for the extra probe u.
  Vector x = vs.back();
  for (int p = 0; p < k; ++p) x = op.apply(x);
  out.variance_bound = (2.0 + probe_fourth_moment(kind)) * kernels::dot(x, x);
  return out;
}

}  // namespace curvlens
