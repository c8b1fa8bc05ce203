#include <cmath>

#include "curvlens/error.hpp"
#include "curvlens/models.hpp"

namespace curvlens {

double Model::loss(const Batch& batch) const { return loss_and_gradient(batch).loss; }

void Model::check_vector(std::span<const double> v, std::span<double> out) const {
  if (v.size() != num_params() || out.size() != num_params()) {
    throw InvalidArgument("curvature product: vector has length " + std::to_string(v.size()) +
                          ", model has " + std::to_string(num_params()) + " parameters");
  }
}

std::vector<double> Model::per_sample_gradients(const Batch& batch) const {
  const std::size_t p = num_params();
  const std::span<const double> w = params();
  std::vector<double> out(batch.size() * p);
  const double twice_gamma = 2.0 * weight_decay();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i) {
    Batch one;
    one.data = batch.data;
    one.rows = {batch.rows[static_cast<std::size_t>(i)]};
    const LossGradient lg = loss_and_gradient(one);
    for (std::size_t j = 0; j < p; ++j) {
      out[static_cast<std::size_t>(i) * p + j] = lg.gradient[j] - twice_gamma * w[j];
    }
  }
  return out;
}

}  // namespace curvlens
