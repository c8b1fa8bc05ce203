#include "curvlens/lanczos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "curvlens/error.hpp"
#include "curvlens/kernels.hpp"

namespace curvlens {

Basis::Basis(std::size_t dim, std::size_t capacity) : dim_(dim) { data_.reserve(dim * capacity); }

std::span<const double> Basis::column(std::size_t i) const {
  return std::span<const double>(data_).subspan(i * dim_, dim_);
}

std::span<double> Basis::column(std::size_t i) {
  return std::span<double>(data_).subspan(i * dim_, dim_);
}

void Basis::append(std::span<const double> v) {
  if (v.size() != dim_) throw InvalidArgument("Basis::append: dimension mismatch");
  data_.insert(data_.end(), v.begin(), v.end());
  ++count_;
}

void Basis::resize(std::size_t count) {
  data_.resize(dim_ * count, 0.0);
  count_ = count;
}

double Basis::orthogonality_loss() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < count_; ++i) {
    for (std::size_t j = i; j < count_; ++j) {
      const double g = kernels::dot(column(i), column(j));
      worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

namespace {

constexpr double kBreakdownTolerance = 1e-12;

// State of one Lanczos recurrence.
struct Recurrence {
  Vector v;       // current unit vector
  Vector v_prev;  // previous unit vector
  Vector w;       // residual workspace
  Vector coeffs;  // reorthogonalization coefficients
  double beta_prev = 0.0;
  double scale = 0.0;  // running max |alpha|, |beta|
  bool active = true;
  LanczosRun run;
  Basis basis;
};

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

Recurrence start(const SymmetricOperator& op, std::size_t steps, std::span<const double> seed,
                 const LanczosOptions& options) {
  if (seed.size() != op.dim()) throw InvalidArgument("lanczos_run: seed dimension mismatch");
  const double nrm = kernels::norm2(seed);
  if (!(nrm > 0.0)) throw InvalidArgument("lanczos_run: seed vector is zero");
  if (!std::isfinite(nrm)) throw NumericalError("lanczos_run: seed vector is not finite");

  Recurrence r;
  r.v.assign(seed.begin(), seed.end());
  kernels::scale(1.0 / nrm, r.v);
  r.v_prev.assign(op.dim(), 0.0);
  r.w.assign(op.dim(), 0.0);
  r.coeffs.assign(steps, 0.0);
  r.run.requested_steps = steps;
  r.run.label = op.label();
  r.run.tridiagonal.alphas.reserve(steps);
  r.run.tridiagonal.betas.reserve(steps);
  if (options.reorthogonalize || options.keep_basis) {
    r.basis = Basis(op.dim(), steps);
    r.basis.append(r.v);
  }
  return r;
}

// Consumes w = H v for the current step and prepares the next vector.
void advance(Recurrence& r, std::size_t step, std::size_t steps, const LanczosOptions& options) {
  if (!all_finite(r.w)) throw NumericalError("lanczos_run: operator produced non-finite values");
  if (step > 0) kernels::axpy(-r.beta_prev, r.v_prev, r.w);
  const double alpha = kernels::dot(r.w, r.v);
  r.run.tridiagonal.alphas.push_back(alpha);
  r.scale = std::max(r.scale, std::abs(alpha));
  if (step + 1 == steps) {
    r.active = false;
    return;
  }
  kernels::axpy(-alpha, r.v, r.w);
  if (options.reorthogonalize) {
    const std::size_t count = r.basis.count();
    for (int pass = 0; pass < 2; ++pass) {
      kernels::project(r.basis.data(), r.basis.dim(), count, r.w, r.coeffs);
      kernels::subtract_combination(r.basis.data(), r.basis.dim(), count, r.coeffs, r.w);
    }
  }
  const double beta = kernels::norm2(r.w);
  if (beta <= kBreakdownTolerance * std::max(r.scale, beta)) {
    r.run.breakdown = true;
    r.active = false;
    return;
  }
  r.scale = std::max(r.scale, beta);
  r.run.tridiagonal.betas.push_back(beta);
  std::swap(r.v_prev, r.v);
  r.v.swap(r.w);
  kernels::scale(1.0 / beta, r.v);
  r.beta_prev = beta;
  if (r.basis.dim() > 0) r.basis.append(r.v);
}

LanczosRun finish(Recurrence& r, const LanczosOptions& options) {
  if (options.keep_basis) r.run.basis = std::move(r.basis);
  return std::move(r.run);
}

void check_steps(const SymmetricOperator& op, std::size_t steps) {
  if (steps < 1 || steps > op.dim()) {
    throw InvalidArgument("lanczos_run: steps must lie in [1, dim]; got " +
                          std::to_string(steps) + " for dim " + std::to_string(op.dim()));
  }
}

}  // namespace

LanczosRun lanczos_run(const SymmetricOperator& op, std::size_t steps,
                       std::span<const double> seed, const LanczosOptions& options) {
  check_steps(op, steps);
  Recurrence r = start(op, steps, seed, options);
  for (std::size_t step = 0; step < steps && r.active; ++step) {
    op.apply(r.v, r.w);
    advance(r, step, steps, options);
  }
  return finish(r, options);
}

std::vector<LanczosRun> lanczos_run_batch(const SymmetricOperator& op, std::size_t steps,
                                          std::span<const Vector> seeds,
                                          const LanczosOptions& options) {
  check_steps(op, steps);
  const std::size_t n = op.dim();
  std::vector<Recurrence> runs;
  runs.reserve(seeds.size());
  for (const Vector& s : seeds) runs.push_back(start(op, steps, s, options));

  std::vector<std::size_t> live;
  Vector x, y;
  for (std::size_t step = 0; step < steps; ++step) {
    live.clear();
    for (std::size_t r = 0; r < runs.size(); ++r)
      if (runs[r].active) live.push_back(r);
    if (live.empty()) break;

    const std::size_t k = live.size();
    if (k == 1) {
      op.apply(runs[live[0]].v, runs[live[0]].w);
    } else {
      x.resize(n * k);
      y.resize(n * k);
      for (std::size_t c = 0; c < k; ++c) {
        const Vector& v = runs[live[c]].v;
        for (std::size_t i = 0; i < n; ++i) x[i * k + c] = v[i];
      }
      op.apply_block(x, y, k);
      for (std::size_t c = 0; c < k; ++c) {
        Vector& w = runs[live[c]].w;
        for (std::size_t i = 0; i < n; ++i) w[i] = y[i * k + c];
      }
    }
    for (std::size_t idx : live) advance(runs[idx], step, steps, options);
  }

  std::vector<LanczosRun> out;
  out.reserve(runs.size());
  for (Recurrence& r : runs) out.push_back(finish(r, options));
  return out;
}

TridiagonalEigen tridiagonal_eigen(const Tridiagonal& t) {
  const std::size_t n = t.alphas.size();
  if (n == 0) throw InvalidArgument("tridiagonal_eigen: empty matrix");
  if (t.betas.size() + 1 != n) throw InvalidArgument("tridiagonal_eigen: need m-1 off-diagonals");

  Vector d = t.alphas;
  Vector e(n, 0.0);
  std::copy(t.betas.begin(), t.betas.end(), e.begin());
  std::vector<double> z(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
  auto at = [&](std::size_t row, std::size_t col) -> double& { return z[col * n + row]; };

  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr int kMaxSweeps = 60;
  const auto ni = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t l = 0; l < ni; ++l) {
    int sweeps = 0;
    std::ptrdiff_t m;
    do {
      for (m = l; m < ni - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m == l) break;
      if (++sweeps > kMaxSweeps) throw ConvergenceError("tridiagonal_eigen: QL did not converge");

      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      std::ptrdiff_t i = m - 1;
      bool underflow = false;
      for (; i >= l; --i) {
        double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        for (std::size_t k = 0; k < n; ++k) {
          f = at(k, i + 1);
          at(k, i + 1) = s * at(k, i) + c * f;
          at(k, i) = c * at(k, i) - s * f;
        }
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    } while (true);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] < d[b]; });
  TridiagonalEigen out;
  out.dim = n;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = d[order[c]];
    std::copy_n(z.begin() + static_cast<std::ptrdiff_t>(order[c] * n), n,
                out.vectors.begin() + static_cast<std::ptrdiff_t>(c * n));
  }
  return out;
}

RitzDecomposition ritz_decompose(const LanczosRun& run, bool with_vectors) {
  const Tridiagonal& t = run.tridiagonal;
  const TridiagonalEigen eig = tridiagonal_eigen(t);
  const std::size_t m = eig.dim;

  RitzDecomposition out;
  out.values = eig.values;
  out.weights.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double first = eig.vectors[i * m];
    out.weights[i] = first * first;
  }
  const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (double& w : out.weights) w /= total;
  out.steps = m;
  out.requested_steps = run.requested_steps;
  out.label = run.label;

  if (with_vectors && run.basis) {
    const Basis& v = *run.basis;
    Basis u(v.dim(), m);
    u.resize(m);
    Vector neg(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) neg[j] = -eig.vectors[i * m + j];
      kernels::subtract_combination(v.data(), v.dim(), m, neg, u.column(i));
    }
    out.vectors = std::move(u);
  }
  return out;
}

double moment_match_check(const SymmetricOperator& op, const RitzDecomposition& ritz,
                          std::span<const double> seed, int k) {
  if (k < 0) throw InvalidArgument("moment_match_check: negative order");
  const auto max_order = static_cast<int>(2 * ritz.values.size()) - 1;
  if (k > max_order) {
    throw InvalidArgument("moment_match_check: order " + std::to_string(k) +
                          " exceeds quadrature exactness degree " + std::to_string(max_order));
  }
  double quadrature = 0.0;
  for (std::size_t i = 0; i < ritz.values.size(); ++i) {
    quadrature += ritz.weights[i] * std::pow(ritz.values[i], k);
  }
  Vector v(seed.begin(), seed.end());
  kernels::scale(1.0 / kernels::norm2(v), v);
  Vector x = v;
  for (int p = 0; p < k; ++p) x = op.apply(x);
  const double exact = kernels::dot(v, x);
  return std::abs(quadrature - exact) / std::max(1.0, std::abs(exact));
}

double chebyshev_t(std::size_t order, double x) {
  if (order == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (std::size_t n = 1; n < order; ++n) {
    const double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

BoundRatio chebyshev_bound_ratio(double gap, std::size_t steps) {
  if (!(gap > 1.0)) throw InvalidArgument("chebyshev_bound_ratio: spectral gap must exceed 1");
  if (steps < 2) throw InvalidArgument("chebyshev_bound_ratio: need at least 2 steps");
  const double rho = gap - 1.0;
  const double c = chebyshev_t(steps - 1, 1.0 + 2.0 * rho);
  BoundRatio out;
  out.lanczos = 1.0 / (c * c);
  out.power = std::pow(1.0 / gap, 2.0 * static_cast<double>(steps - 1));
  return out;
}

}  // namespace curvlens
