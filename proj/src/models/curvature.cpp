#include <Eigen/Dense>

#include <cmath>

#include "curvlens/error.hpp"
#include "curvlens/kernels.hpp"
#include "curvlens/models.hpp"
#include "json.hpp"

namespace curvlens {

std::string_view to_string(CurvatureKind kind) {
  switch (kind) {
    case CurvatureKind::hessian: return "hessian";
    case CurvatureKind::ggn: return "ggn";
    case CurvatureKind::abs_hessian: return "abs_hessian";
  }
  return "unknown";
}

CurvatureKind parse_curvature_kind(std::string_view name) {
  if (name == "hessian") return CurvatureKind::hessian;
  if (name == "ggn") return CurvatureKind::ggn;
  if (name == "abs_hessian") return CurvatureKind::abs_hessian;
  throw InvalidArgument("unknown curvature kind '" + std::string(name) + "'");
}

namespace {

using Product = void (Model::*)(const Batch&, std::span<const double>, std::span<double>) const;

DenseSymmetric assemble(const Model& model, const Batch& batch, Product product) {
  const std::size_t n = model.num_params();
  if (n > kOracleMaxDim) {
    throw InvalidArgument("dense curvature: " + std::to_string(n) + " parameters exceed oracle scale");
  }
  std::vector<double> cols(n * n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(n); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    Vector e(n, 0.0), out(n);
    e[j] = 1.0;
    (model.*product)(batch, e, out);
    for (std::size_t i = 0; i < n; ++i) cols[i * n + j] = out[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (cols[i * n + j] + cols[j * n + i]);
      cols[i * n + j] = s;
      cols[j * n + i] = s;
    }
  }
  return DenseSymmetric::from_row_major(n, std::move(cols));
}

DenseSymmetric absolute_value(const DenseSymmetric& h) {
  const EigenDecomposition eig = dense_eigendecomposition(h);
  const auto n = static_cast<Eigen::Index>(h.dim());
  const Eigen::Map<const Eigen::MatrixXd> z(eig.vectors.data(), n, n);
  Eigen::VectorXd mag(n);
  for (Eigen::Index i = 0; i < n; ++i) mag[i] = std::abs(eig.values[static_cast<std::size_t>(i)]);
  const Eigen::MatrixXd m = z * mag.asDiagonal() * z.transpose();
  std::vector<double> a(h.dim() * h.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double s = 0.5 * (m(i, j) + m(j, i));
      a[static_cast<std::size_t>(i * n + j)] = s;
      a[static_cast<std::size_t>(j * n + i)] = s;
    }
  }
  return DenseSymmetric::from_row_major(h.dim(), std::move(a));
}

}  // namespace

DenseSymmetric dense_curvature(const Model& model, const Batch& batch, CurvatureKind kind) {
  switch (kind) {
    case CurvatureKind::hessian: return assemble(model, batch, &Model::hessian_vector_product);
    case CurvatureKind::ggn: return assemble(model, batch, &Model::ggn_vector_product);
    case CurvatureKind::abs_hessian:
      if (model.num_params() > kAbsHessianMaxParams) {
        throw InvalidArgument("abs_hessian needs a dense eigendecomposition; " +
                              std::to_string(model.num_params()) + " parameters exceed " +
                              std::to_string(kAbsHessianMaxParams));
      }
      return absolute_value(assemble(model, batch, &Model::hessian_vector_product));
  }
  throw InvalidArgument("dense_curvature: unknown kind");
}

SymmetricOperator curvature_operator(const Model& model, const Batch& batch, CurvatureKind kind) {
  const std::size_t n = model.num_params();
  std::string label = std::string(to_string(kind)) + ":" + std::string(model.kind());
  if (kind == CurvatureKind::abs_hessian) {
    return as_operator(dense_curvature(model, batch, kind), std::move(label));
  }
  std::shared_ptr<const Model> owned = model.clone();
  auto rows = std::make_shared<const Batch>(batch);
  const Product product = kind == CurvatureKind::hessian ? &Model::hessian_vector_product
                                                         : &Model::ggn_vector_product;
  auto apply = [owned, rows, product](std::span<const double> v, std::span<double> out) {
    ((*owned).*product)(*rows, v, out);
  };
  // Block inputs are row-major n x k; each column is gathered and applied separately.
  auto block = [owned, rows, product, n](std::span<const double> x, std::span<double> y,
                                         std::size_t k) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t cc = 0; cc < static_cast<std::ptrdiff_t>(k); ++cc) {
      const auto c = static_cast<std::size_t>(cc);
      Vector v(n), out(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = x[i * k + c];
      ((*owned).*product)(*rows, v, out);
      for (std::size_t i = 0; i < n; ++i) y[i * k + c] = out[i];
    }
  };
  return SymmetricOperator(n, std::move(apply), std::move(label), std::move(block));
}

CurvatureBounds lipschitz_bounds_logreg(const Dataset& data, double weight_decay) {
  if (data.n_samples == 0 || data.d_in == 0) throw InvalidArgument("lipschitz_bounds_logreg: empty dataset");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("lipschitz_bounds_logreg: negative weight decay");
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMatrix> x(data.inputs.data(), static_cast<Eigen::Index>(data.n_samples),
                                      static_cast<Eigen::Index>(data.d_in));
  const Eigen::MatrixXd gram = x.transpose() * x;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw ConvergenceError("lipschitz_bounds_logreg: eigensolver failed");
  const double top = std::max(0.0, solver.eigenvalues().maxCoeff());
  return {0.5 * top / static_cast<double>(data.n_samples) + 2.0 * weight_decay, 2.0 * weight_decay};
}

GradientNoise gradient_noise_stats(const Model& model, const Dataset& data, std::size_t batch_size,
                                   std::size_t trials, SeedStream& stream) {
  if (batch_size == 0) throw InvalidArgument("gradient_noise_stats: batch size must be positive");
  if (batch_size >= data.n_samples) {
    throw InvalidArgument("gradient_noise_stats: batch size must be below the dataset size");
  }
  if (trials == 0) throw InvalidArgument("gradient_noise_stats: need at least one trial");
  const std::size_t p = model.num_params();
  const std::span<const double> w = model.params();
  const double twice_gamma = 2.0 * model.weight_decay();

  const std::vector<double> per_sample = model.per_sample_gradients(full_batch(data));
  const auto count = static_cast<double>(data.n_samples);
  Vector mean(p, 0.0);
  for (std::size_t i = 0; i < data.n_samples; ++i) {
    for (std::size_t j = 0; j < p; ++j) mean[j] += per_sample[i * p + j];
  }
  for (double& m : mean) m /= count;

  GradientNoise out;
  out.batch_size = batch_size;
  out.trials = trials;
  out.coordinate_variance.assign(p, 0.0);
  for (std::size_t i = 0; i < data.n_samples; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double d = per_sample[i * p + j] - mean[j];
      out.coordinate_variance[j] += d * d;
    }
  }
  for (double& v : out.coordinate_variance) {
    v /= count;
    out.mean_coordinate_variance += v;
  }
  out.mean_coordinate_variance /= static_cast<double>(p);
  out.predicted_norm_squared =
      static_cast<double>(p) * out.mean_coordinate_variance / static_cast<double>(batch_size);

  for (std::size_t t = 0; t < trials; ++t) {
    const Batch batch = sample_batch(data, batch_size, stream, true);
    const LossGradient lg = model.loss_and_gradient(batch);
    double sq = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double e = mean[j] - (lg.gradient[j] - twice_gamma * w[j]);
      sq += e * e;
    }
    out.mean_norm += std::sqrt(sq);
    out.mean_norm_squared += sq;
  }
  out.mean_norm /= static_cast<double>(trials);
  out.mean_norm_squared /= static_cast<double>(trials);
  return out;
}

std::string save_checkpoint(const Model& model) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(model.kind());
  if (const auto* lr = dynamic_cast<const LogisticRegression*>(&model)) {
    j["d_in"] = lr->d_in();
    j["n_c"] = lr->n_classes();
  } else if (const auto* mlp = dynamic_cast<const MLP*>(&model)) {
    j["sizes"] = mlp->sizes();
  } else if (const auto* q = dynamic_cast<const QuadraticModel*>(&model)) {
    j["dim"] = q->matrix().dim();
    j["matrix"] = std::vector<double>(q->matrix().entries().begin(), q->matrix().entries().end());
    j["center"] = q->center();
  } else {
    throw InvalidArgument("save_checkpoint: unsupported model kind");
  }
  j["weight_decay"] = model.weight_decay();
  j["params"] = std::vector<double>(model.params().begin(), model.params().end());
  return j.dump(2);
}

std::unique_ptr<Model> load_checkpoint(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    const double gamma = j.at("weight_decay").get<double>();
    const auto params = j.at("params").get<std::vector<double>>();
    std::unique_ptr<Model> model;
    if (kind == "logistic") {
      model = std::make_unique<LogisticRegression>(j.at("d_in").get<std::size_t>(),
                                                   j.at("n_c").get<std::size_t>(), gamma);
    } else if (kind == "mlp") {
      SeedStream unused(0);
      model = std::make_unique<MLP>(j.at("sizes").get<std::vector<std::size_t>>(), gamma, unused);
    } else if (kind == "quadratic") {
      const auto n = j.at("dim").get<std::size_t>();
      model = std::make_unique<QuadraticModel>(
          DenseSymmetric::from_row_major(n, j.at("matrix").get<std::vector<double>>()),
          j.at("center").get<Vector>());
    } else {
      throw FormatError("checkpoint: unknown model kind '" + kind + "'");
    }
    model->set_params(params);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint JSON: ") + e.what());
  }
}

}  // namespace curvlens
