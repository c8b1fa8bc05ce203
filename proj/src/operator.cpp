#include "curvlens/operator.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <utility>

#include "curvlens/error.hpp"
#include "curvlens/kernels.hpp"

namespace curvlens {

SymmetricOperator::SymmetricOperator(std::size_t dim, Apply apply, std::string label,
                                     BlockApply block_apply)
    : dim_(dim), apply_(std::move(apply)), label_(std::move(label)),
      block_apply_(std::move(block_apply)) {
  if (dim_ == 0) throw InvalidArgument("SymmetricOperator: dimension must be positive");
  if (!apply_) throw InvalidArgument("SymmetricOperator: empty apply function");
}

void SymmetricOperator::apply(std::span<const double> v, std::span<double> out) const {
  if (v.size() != dim_ || out.size() != dim_) {
    throw InvalidArgument("SymmetricOperator::apply: dimension mismatch");
  }
  apply_(v, out);
}

Vector SymmetricOperator::apply(std::span<const double> v) const {
  Vector out(dim_);
  apply(v, out);
  return out;
}

void SymmetricOperator::apply_block(std::span<const double> x, std::span<double> y,
                                    std::size_t k) const {
  if (x.size() != dim_ * k || y.size() != dim_ * k) {
    throw InvalidArgument("SymmetricOperator::apply_block: dimension mismatch");
  }
  if (block_apply_) {
    block_apply_(x, y, k);
    return;
  }
  Vector in(dim_), out(dim_);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < dim_; ++i) in[i] = x[i * k + c];
    apply_(in, out);
    for (std::size_t i = 0; i < dim_; ++i) y[i * k + c] = out[i];
  }
}

DenseSymmetric::DenseSymmetric(std::size_t n) : n_(n), a_(n * n, 0.0) {}

DenseSymmetric DenseSymmetric::identity(std::size_t n) {
  DenseSymmetric m(n);
  for (std::size_t i = 0; i < n; ++i) m.a_[i * n + i] = 1.0;
  return m;
}

DenseSymmetric DenseSymmetric::diagonal(std::span<const double> d) {
  DenseSymmetric m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m.a_[i * d.size() + i] = d[i];
  return m;
}

DenseSymmetric DenseSymmetric::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  std::vector<double> entries;
  entries.reserve(n * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw InvalidArgument("DenseSymmetric: matrix is not square");
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return from_row_major(n, std::move(entries));
}

DenseSymmetric DenseSymmetric::from_row_major(std::size_t n, std::vector<double> entries) {
  if (entries.size() != n * n) throw InvalidArgument("DenseSymmetric: wrong entry count");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (entries[i * n + j] != entries[j * n + i]) {
        throw InvalidArgument("DenseSymmetric: entries are not exactly symmetric");
      }
    }
  }
  DenseSymmetric m;
  m.n_ = n;
  m.a_ = std::move(entries);
  return m;
}

void DenseSymmetric::set(std::size_t i, std::size_t j, double value) {
  a_[i * n_ + j] = value;
  a_[j * n_ + i] = value;
}

Vector DenseSymmetric::diagonal() const {
  Vector d(n_);
  for (std::size_t i = 0; i < n_; ++i) d[i] = a_[i * n_ + i];
  return d;
}

Vector DenseSymmetric::multiply(std::span<const double> v) const {
  if (v.size() != n_) throw InvalidArgument("DenseSymmetric::multiply: dimension mismatch");
  Vector out(n_);
  kernels::gemv(a_, n_, n_, v, out);
  return out;
}

double DenseSymmetric::frobenius_squared() const {
  double s = 0.0;
  for (double x : a_) s += x * x;
  return s;
}

SymmetricOperator as_operator(std::shared_ptr<const DenseSymmetric> m, std::string label) {
  if (!m) throw InvalidArgument("as_operator: null matrix");
  const std::size_t n = m->dim();
  auto apply = [m](std::span<const double> v, std::span<double> out) {
    kernels::gemv(m->entries(), m->dim(), m->dim(), v, out);
  };
  auto block = [m](std::span<const double> x, std::span<double> y, std::size_t k) {
    kernels::gemm(m->entries(), m->dim(), m->dim(), x, y, k);
  };
  return SymmetricOperator(n, std::move(apply), std::move(label), std::move(block));
}

SymmetricOperator as_operator(DenseSymmetric m, std::string label) {
  return as_operator(std::make_shared<const DenseSymmetric>(std::move(m)), std::move(label));
}

EigenDecomposition dense_eigendecomposition(const DenseSymmetric& m, bool with_vectors) {
  const std::size_t n = m.dim();
  if (n == 0) throw InvalidArgument("dense_eigendecomposition: empty matrix");
  if (n > kOracleMaxDim) {
    throw InvalidArgument("dense_eigendecomposition: dimension " + std::to_string(n) +
                          " exceeds oracle limit " + std::to_string(kOracleMaxDim));
  }
  const Eigen::Map<const Eigen::MatrixXd> a(m.entries().data(), static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      a, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("dense_eigendecomposition: QR iteration did not converge (dim " +
                           std::to_string(n) + ")");
  }
  EigenDecomposition out;
  out.dim = n;
  out.values.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
  if (with_vectors) {
    const Eigen::MatrixXd& z = solver.eigenvectors();
    out.vectors.assign(z.data(), z.data() + n * n);
  }
  return out;
}

DenseSymmetric to_dense(const SymmetricOperator& op) {
  const std::size_t n = op.dim();
  std::vector<double> cols(n * n);
  Vector e(n, 0.0), out(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(e, out);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) cols[i * n + j] = out[i];
  }
  // Average with the transpose so the result is exactly symmetric.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (cols[i * n + j] + cols[j * n + i]);
      cols[i * n + j] = s;
      cols[j * n + i] = s;
    }
  }
  return DenseSymmetric::from_row_major(n, std::move(cols));
}

SymmetricOperator apply_shifted(const SymmetricOperator& op, double mu, bool negate) {
  const double sign = negate ? -1.0 : 1.0;
  auto apply = [op, mu, sign](std::span<const double> v, std::span<double> out) {
    op.apply(v, out);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = sign * out[i] + mu * v[i];
  };
  auto block = [op, mu, sign](std::span<const double> x, std::span<double> y, std::size_t k) {
    op.apply_block(x, y, k);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sign * y[i] + mu * x[i];
  };
  std::string label = (negate ? "-(" : "(") + op.label() + ")";
  if (mu != 0.0) label += "+" + std::to_string(mu) + "I";
  return SymmetricOperator(op.dim(), std::move(apply), std::move(label), std::move(block));
}

double estimate_norm(const SymmetricOperator& op, SeedStream& stream, int iterations) {
  Vector v = probe_vector(stream, op.dim(), ProbeKind::gaussian);
  kernels::scale(1.0 / kernels::norm2(v), v);
  Vector w(op.dim());
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    op.apply(v, w);
    const double nrm = kernels::norm2(w);
    if (!(nrm > 0.0)) return 0.0;
    estimate = nrm;
    for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / nrm;
  }
  return estimate;
}

double symmetry_defect(const SymmetricOperator& op, SeedStream& stream, int probes) {
  const double scale = std::max(estimate_norm(op, stream), 1e-300);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const Vector u = probe_vector(stream, op.dim(), ProbeKind::gaussian);
    const Vector v = probe_vector(stream, op.dim(), ProbeKind::gaussian);
    const double uhv = kernels::dot(u, op.apply(v));
    const double vhu = kernels::dot(v, op.apply(u));
    const double denom = kernels::norm2(u) * kernels::norm2(v) * scale;
    worst = std::max(worst, std::abs(uhv - vhu) / denom);
  }
  return worst;
}

}  // namespace curvlens
