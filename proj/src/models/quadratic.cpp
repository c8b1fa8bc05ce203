#include "curvlens/error.hpp"
#include "curvlens/kernels.hpp"
#include "curvlens/models.hpp"

namespace curvlens {

QuadraticModel::QuadraticModel(DenseSymmetric a, Vector center)
    : a_(std::move(a)), c_(std::move(center)), p_(c_.size(), 0.0) {
  if (a_.dim() == 0 || a_.dim() != c_.size()) {
    throw InvalidArgument("QuadraticModel: matrix and center dimensions differ");
  }
}

void QuadraticModel::set_params(std::span<const double> p) {
  if (p.size() != p_.size()) throw InvalidArgument("QuadraticModel: parameter length mismatch");
  p_.assign(p.begin(), p.end());
}

LossGradient QuadraticModel::loss_and_gradient(const Batch&) const {
  Vector d(p_.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = p_[i] - c_[i];
  LossGradient r;
  r.gradient = a_.multiply(d);
  r.loss = 0.5 * kernels::dot(d, r.gradient);
  return r;
}

void QuadraticModel::hessian_vector_product(const Batch&, std::span<const double> v,
                                            std::span<double> out) const {
  check_vector(v, out);
  kernels::gemv(a_.entries(), a_.dim(), a_.dim(), v, out);
}

void QuadraticModel::ggn_vector_product(const Batch& batch, std::span<const double> v,
                                        std::span<double> out) const {
  hessian_vector_product(batch, v, out);
}

std::unique_ptr<Model> QuadraticModel::clone() const {
  return std::make_unique<QuadraticModel>(*this);
}

}  // namespace curvlens
