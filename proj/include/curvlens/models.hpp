#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curvlens/dataset.hpp"
#include "curvlens/operator.hpp"

namespace curvlens {

struct LossGradient {
  double loss = 0.0;
  Vector gradient;
};

/// A differentiable model with a flat parameter vector. Losses are means
/// over the batch plus gamma * ||p||^2.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t num_params() const = 0;
  virtual std::span<const double> params() const = 0;
  virtual void set_params(std::span<const double> p) = 0;
  /// Number of weight layers; used as the outlier count l by the bulk estimators.
  virtual std::size_t num_layers() const = 0;
  virtual double weight_decay() const = 0;

  virtual double loss(const Batch& batch) const;
  virtual LossGradient loss_and_gradient(const Batch& batch) const = 0;
  virtual void hessian_vector_product(const Batch& batch, std::span<const double> v,
                                      std::span<double> out) const = 0;
  /// J' H_L J v plus the 2 gamma v contribution of the regularizer.
  virtual void ggn_vector_product(const Batch& batch, std::span<const double> v,
                                  std::span<double> out) const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;

  /// Mean-loss gradient of the data term only, per sample in `batch`, row-major.
  std::vector<double> per_sample_gradients(const Batch& batch) const;

 protected:
  void check_vector(std::span<const double> v, std::span<double> out) const;
};

/// Softmax regression without bias: logits z = W' x, W stored row-major d_in x n_c.
class LogisticRegression final : public Model {
 public:
  LogisticRegression(std::size_t d_in, std::size_t n_classes, double weight_decay);

  std::string_view kind() const override { return "logistic"; }
  std::size_t num_params() const override { return w_.size(); }
  std::span<const double> params() const override { return w_; }
  void set_params(std::span<const double> p) override;
  std::size_t num_layers() const override { return 1; }
  double weight_decay() const override { return gamma_; }

  LossGradient loss_and_gradient(const Batch& batch) const override;
  void hessian_vector_product(const Batch& batch, std::span<const double> v,
                              std::span<double> out) const override;
  void ggn_vector_product(const Batch& batch, std::span<const double> v,
                          std::span<double> out) const override;
  std::unique_ptr<Model> clone() const override;

  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t n_classes() const noexcept { return n_c_; }

 private:
  std::size_t d_in_;
  std::size_t n_c_;
  double gamma_;
  Vector w_;
};

/// Fully connected ReLU network with a softmax cross-entropy head. Each layer
/// stores W (out x in, row-major) followed by its bias.
class MLP final : public Model {
 public:
  /// sizes = {d_in, hidden..., n_classes}; He-normal weights, zero biases.
  MLP(std::vector<std::size_t> sizes, double weight_decay, SeedStream& stream);

  std::string_view kind() const override { return "mlp"; }
  std::size_t num_params() const override { return p_.size(); }
  std::span<const double> params() const override { return p_; }
  void set_params(std::span<const double> p) override;
  std::size_t num_layers() const override { return sizes_.size() - 1; }
  double weight_decay() const override { return gamma_; }

  LossGradient loss_and_gradient(const Batch& batch) const override;
  void hessian_vector_product(const Batch& batch, std::span<const double> v,
                              std::span<double> out) const override;
  void ggn_vector_product(const Batch& batch, std::span<const double> v,
                          std::span<double> out) const override;
  std::unique_ptr<Model> clone() const override;

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

 private:
  void check_batch(const Batch& batch) const;

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;  ///< start of each layer's W in p_
  double gamma_;
  Vector p_;
};

/// 0.5 (p - c)' A (p - c). Batches are ignored; used as an exact test model.
class QuadraticModel final : public Model {
 public:
  QuadraticModel(DenseSymmetric a, Vector center);

  std::string_view kind() const override { return "quadratic"; }
  std::size_t num_params() const override { return p_.size(); }
  std::span<const double> params() const override { return p_; }
  void set_params(std::span<const double> p) override;
  std::size_t num_layers() const override { return 1; }
  double weight_decay() const override { return 0.0; }

  LossGradient loss_and_gradient(const Batch& batch) const override;
  void hessian_vector_product(const Batch& batch, std::span<const double> v,
                              std::span<double> out) const override;
  void ggn_vector_product(const Batch& batch, std::span<const double> v,
                          std::span<double> out) const override;
  std::unique_ptr<Model> clone() const override;

  const DenseSymmetric& matrix() const noexcept { return a_; }
  const Vector& center() const noexcept { return c_; }

 private:
  DenseSymmetric a_;
  Vector c_;
  Vector p_;
};

enum class CurvatureKind { hessian, ggn, abs_hessian };

std::string_view to_string(CurvatureKind kind);
CurvatureKind parse_curvature_kind(std::string_view name);

/// Largest parameter count for which abs_hessian may be formed.
inline constexpr std::size_t kAbsHessianMaxParams = 2000;

/// Curvature of `model` at its current parameters on `batch`. The operator
/// owns a copy of the model and the batch rows; the dataset must outlive it.
/// abs_hessian is assembled densely as sum |lambda_i| phi_i phi_i'.
SymmetricOperator curvature_operator(const Model& model, const Batch& batch, CurvatureKind kind);

/// Dense matrix of the chosen curvature, assembled column by column.
DenseSymmetric dense_curvature(const Model& model, const Batch& batch, CurvatureKind kind);

struct CurvatureBounds {
  double lipschitz;
  double strong_convexity;
};

/// Bounds for the mean softmax cross-entropy plus gamma ||W||^2:
/// L = 0.5 lambda_max(X'X) / N + 2 gamma, mu = 2 gamma. The 0.5 bounds the
/// largest eigenvalue of diag(p) - p p' over the probability simplex.
CurvatureBounds lipschitz_bounds_logreg(const Dataset& data, double weight_decay);

struct GradientNoise {
  double mean_norm = 0.0;
  double mean_norm_squared = 0.0;
  /// Population variance of each gradient coordinate over single samples.
  Vector coordinate_variance;
  double mean_coordinate_variance = 0.0;
  /// E||eps||^2 = P <sigma_j^2> / T for minibatches drawn with replacement.
  double predicted_norm_squared = 0.0;
  std::size_t batch_size = 0;
  std::size_t trials = 0;
};

/// Noise eps = full gradient - minibatch gradient over `trials` minibatches
/// of size T drawn with replacement.
GradientNoise gradient_noise_stats(const Model& model, const Dataset& data, std::size_t batch_size,
                                   std::size_t trials, SeedStream& stream);

/// JSON checkpoint: {"kind", shape fields, "weight_decay", "params": [...]}.
std::string save_checkpoint(const Model& model);
std::unique_ptr<Model> load_checkpoint(const std::string& text);

}  // namespace curvlens
