#include <cmath>

#include "curvlens/error.hpp"
#include "curvlens/models.hpp"
#include "sample_reduce.hpp"

namespace curvlens {

LogisticRegression::LogisticRegression(std::size_t d_in, std::size_t n_classes, double weight_decay)
    : d_in_(d_in), n_c_(n_classes), gamma_(weight_decay), w_(d_in * n_classes, 0.0) {
  if (d_in == 0 || n_classes < 2) throw InvalidArgument("LogisticRegression: bad shape");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("LogisticRegression: negative weight decay");
}

void LogisticRegression::set_params(std::span<const double> p) {
  if (p.size() != w_.size()) throw InvalidArgument("LogisticRegression: parameter length mismatch");
  for (double x : p) {
    if (!std::isfinite(x)) throw InvalidArgument("LogisticRegression: non-finite parameter");
  }
  w_.assign(p.begin(), p.end());
}

namespace {

void check_batch(const Batch& batch, std::size_t d_in, std::size_t n_c) {
  if (batch.data == nullptr || batch.empty()) throw InvalidArgument("model: empty batch");
  if (batch.data->d_in != d_in) throw InvalidArgument("model: input dimension mismatch");
  if (batch.data->n_classes > n_c) throw InvalidArgument("model: dataset has more classes than model");
}

}  // namespace

LossGradient LogisticRegression::loss_and_gradient(const Batch& batch) const {
  check_batch(batch, d_in_, n_c_);
  const Dataset& data = *batch.data;
  const std::size_t p = w_.size();
  Vector acc(p + 1);
  detail::reduce_samples(batch.size(), acc, [&](std::size_t b, std::size_t e, std::span<double> out) {
    Vector z(n_c_), prob(n_c_);
    for (std::size_t s = b; s < e; ++s) {
      const std::size_t r = batch.rows[s];
      const auto x = data.row(r);
      const auto y = static_cast<std::size_t>(data.labels[r]);
      std::fill(z.begin(), z.end(), 0.0);
      for (std::size_t i = 0; i < d_in_; ++i) {
        const double* wi = w_.data() + i * n_c_;
        for (std::size_t c = 0; c < n_c_; ++c) z[c] += x[i] * wi[c];
      }
      const double lse = detail::softmax(z, prob);
      out[p] += lse - z[y];
      prob[y] -= 1.0;
      for (std::size_t i = 0; i < d_in_; ++i) {
        double* gi = out.data() + i * n_c_;
        for (std::size_t c = 0; c < n_c_; ++c) gi[c] += x[i] * prob[c];
      }
    }
  });
  const double inv = 1.0 / static_cast<double>(batch.size());
  LossGradient r;
  r.gradient.resize(p);
  double reg = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    r.gradient[j] = acc[j] * inv + 2.0 * gamma_ * w_[j];
    reg += w_[j] * w_[j];
  }
  r.loss = acc[p] * inv + gamma_ * reg;
  if (!std::isfinite(r.loss)) throw NumericalError("LogisticRegression: non-finite loss");
  return r;
}

void LogisticRegression::hessian_vector_product(const Batch& batch, std::span<const double> v,
                                                std::span<double> out) const {
  check_vector(v, out);
  check_batch(batch, d_in_, n_c_);
  const Dataset& data = *batch.data;
  detail::reduce_samples(batch.size(), out, [&](std::size_t b, std::size_t e, std::span<double> acc) {
    Vector z(n_c_), prob(n_c_), u(n_c_);
    for (std::size_t s = b; s < e; ++s) {
      const auto x = data.row(batch.rows[s]);
      std::fill(z.begin(), z.end(), 0.0);
      std::fill(u.begin(), u.end(), 0.0);
      for (std::size_t i = 0; i < d_in_; ++i) {
        const double* wi = w_.data() + i * n_c_;
        const double* vi = v.data() + i * n_c_;
        for (std::size_t c = 0; c < n_c_; ++c) {
          z[c] += x[i] * wi[c];
          u[c] += x[i] * vi[c];
        }
      }
      detail::softmax(z, prob);
      detail::softmax_hessian_apply(prob, u);
      for (std::size_t i = 0; i < d_in_; ++i) {
        double* ai = acc.data() + i * n_c_;
        for (std::size_t c = 0; c < n_c_; ++c) ai[c] += x[i] * u[c];
      }
    }
  });
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = out[j] * inv + 2.0 * gamma_ * v[j];
}

// For a linear model the network Jacobian has no curvature, so the GGN and
// the Hessian coincide.
void LogisticRegression::ggn_vector_product(const Batch& batch, std::span<const double> v,
                                            std::span<double> out) const {
  hessian_vector_product(batch, v, out);
}

std::unique_ptr<Model> LogisticRegression::clone() const {
  return std::make_unique<LogisticRegression>(*this);
}

}  // namespace curvlens
