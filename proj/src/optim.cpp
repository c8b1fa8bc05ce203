#include "curvlens/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "curvlens/bulk.hpp"
#include "curvlens/error.hpp"
#include "curvlens/kernels.hpp"
#include "curvlens/spectral_density.hpp"

namespace curvlens {

std::string_view to_string(ScheduleSource source) {
  switch (source) {
    case ScheduleSource::ssgd: return "ssgd";
    case ScheduleSource::ssgdm: return "ssgdm";
    case ScheduleSource::theoretical: return "theoretical";
    case ScheduleSource::fixed: return "fixed";
  }
  return "unknown";
}

namespace {

void check_spectrum(double lambda_max, double lambda_b, const char* what) {
  if (!(lambda_b > 0.0)) throw InvalidArgument(std::string(what) + ": lower curvature must be positive");
  if (!(lambda_max >= lambda_b)) {
    throw InvalidArgument(std::string(what) + ": upper curvature below lower curvature");
  }
}

}  // namespace

SpectralSchedule ssgd_schedule(double lambda_max, double lambda_b) {
  check_spectrum(lambda_max, lambda_b, "ssgd_schedule");
  return {2.0 / (lambda_max + lambda_b), 0.0, ScheduleSource::ssgd};
}

SpectralSchedule ssgdm_schedule(double lambda_max, double lambda_b) {
  check_spectrum(lambda_max, lambda_b, "ssgdm_schedule");
  const double a = std::sqrt(lambda_max);
  const double b = std::sqrt(lambda_b);
  const double alpha = 2.0 / (a + b);
  const double beta = (a - b) / (a + b);
  return {alpha * alpha, beta * beta, ScheduleSource::ssgdm};
}

SpectralSchedule theoretical_schedule(double lipschitz, double strong_convexity, bool with_momentum) {
  check_spectrum(lipschitz, strong_convexity, "theoretical_schedule");
  SpectralSchedule s = with_momentum ? ssgdm_schedule(lipschitz, strong_convexity)
                                     : ssgd_schedule(lipschitz, strong_convexity);
  s.source = ScheduleSource::theoretical;
  return s;
}

SpectralSchedule fixed_schedule(double alpha, double beta) {
  if (!(alpha > 0.0)) throw InvalidArgument("fixed_schedule: alpha must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) throw InvalidArgument("fixed_schedule: beta must lie in [0, 1)");
  return {alpha, beta, ScheduleSource::fixed};
}

HeavyBall::HeavyBall(std::span<const double> start) : previous_(start.begin(), start.end()) {}

void HeavyBall::step(std::span<double> p, std::span<const double> gradient,
                     const SpectralSchedule& s) {
  if (p.size() != previous_.size() || gradient.size() != p.size()) {
    throw InvalidArgument("HeavyBall::step: dimension mismatch");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double current = p[i];
    p[i] = current - s.alpha * gradient[i] + s.beta * (current - previous_[i]);
    previous_[i] = current;
  }
}

std::string_view to_string(TrainVariant variant) {
  switch (variant) {
    case TrainVariant::ssgd: return "ssgd";
    case TrainVariant::ssgdm: return "ssgdm";
    case TrainVariant::sgd_fixed: return "sgd_fixed";
    case TrainVariant::sgdm_fixed: return "sgdm_fixed";
    case TrainVariant::sgd_theoretical: return "sgd_theoretical";
    case TrainVariant::sgdm_theoretical: return "sgdm_theoretical";
  }
  return "unknown";
}

TrainVariant parse_train_variant(std::string_view name) {
  for (TrainVariant v : {TrainVariant::ssgd, TrainVariant::ssgdm, TrainVariant::sgd_fixed,
                         TrainVariant::sgdm_fixed, TrainVariant::sgd_theoretical,
                         TrainVariant::sgdm_theoretical}) {
    if (name == to_string(v)) return v;
  }
  throw InvalidArgument("unknown training variant '" + std::string(name) + "'");
}

bool is_spectral(TrainVariant variant) {
  return variant == TrainVariant::ssgd || variant == TrainVariant::ssgdm;
}

std::string_view to_string(BulkSeed seed) {
  return seed == BulkSeed::random_vector ? "random" : "gradient";
}

BulkSeed parse_bulk_seed(std::string_view name) {
  if (name == "random") return BulkSeed::random_vector;
  if (name == "gradient") return BulkSeed::gradient;
  throw InvalidArgument("unknown bulk seed '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw InvalidArgument("train: batch size must be positive");
  if (refresh_interval < 1) throw InvalidArgument("train: refresh interval must be at least 1");
  if (lanczos_steps < 3) throw InvalidArgument("train: need at least 3 Lanczos steps");
}

SpectralRefresh spectral_refresh(const SymmetricOperator& op, std::span<const double> seed,
                                 std::size_t steps, std::size_t layers, BulkSeed method,
                                 bool momentum) {
  const std::size_t m = std::min(steps, op.dim());
  LanczosOptions options;
  options.keep_basis = false;
  const RitzDecomposition ritz = ritz_decompose(lanczos_run(op, m, seed, options), false);

  SpectralRefresh out;
  out.lambda_max = ritz.values.back();
  const std::size_t count = ritz.values.size();
  if (count > layers + 2) {
    out.lambda_b = method == BulkSeed::random_vector
                       ? bulk_mean_random_vector(DiracMixture::from_ritz(ritz), layers).lambda_b
                       : bulk_median_gradient(ritz.values, layers).lambda_b;
  } else {
    out.warnings.push_back("only " + std::to_string(count) +
                           " Ritz values; bulk taken as the quadrature mean of all of them");
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += ritz.weights[i] * ritz.values[i];
    out.lambda_b = mean;
  }
  if (!(out.lambda_max > 0.0)) {
    throw NumericalError("spectral_refresh: curvature has no positive Ritz value");
  }
  if (out.lambda_b >= out.lambda_max) {
    out.warnings.push_back("bulk estimate " + std::to_string(out.lambda_b) +
                           " clamped to lambda_max " + std::to_string(out.lambda_max));
    out.lambda_b = out.lambda_max;
  } else if (!(out.lambda_b > 0.0)) {
    const double floor = 1e-6 * out.lambda_max;
    out.warnings.push_back("non-positive bulk estimate " + std::to_string(out.lambda_b) +
                           " raised to " + std::to_string(floor));
    out.lambda_b = floor;
  }
  out.schedule = momentum ? ssgdm_schedule(out.lambda_max, out.lambda_b)
                          : ssgd_schedule(out.lambda_max, out.lambda_b);
  return out;
}

SpectralRefresh spectral_refresh(const Model& model, const Batch& batch, const TrainConfig& config,
                                 bool momentum, SeedStream& stream) {
  if (config.curvature == CurvatureKind::hessian) {
    throw InvalidArgument("spectral_refresh: needs a positive-definite curvature (ggn or abs_hessian)");
  }
  const SymmetricOperator op = curvature_operator(model, batch, config.curvature);
  Vector seed;
  if (config.bulk_seed == BulkSeed::gradient) {
    seed = model.loss_and_gradient(batch).gradient;
    if (kernels::norm2(seed) == 0.0) seed = probe_vector(stream, op.dim(), config.probe);
  } else {
    seed = probe_vector(stream, op.dim(), config.probe);
  }
  const std::size_t layers = config.layers.value_or(model.num_layers());
  return spectral_refresh(op, seed, config.lanczos_steps, layers, config.bulk_seed, momentum);
}

TrainTrace train(Model& model, const Dataset& train_set, const Dataset* validation,
                 const TrainConfig& config, TrainVariant variant) {
  config.validate();
  TrainTrace trace;
  trace.variant = variant;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  SpectralSchedule schedule;
  double lambda_max = nan, lambda_b = nan;
  switch (variant) {
    case TrainVariant::sgd_fixed: schedule = fixed_schedule(config.alpha, 0.0); break;
    case TrainVariant::sgdm_fixed: schedule = fixed_schedule(config.alpha, config.beta); break;
    case TrainVariant::sgd_theoretical:
    case TrainVariant::sgdm_theoretical:
      if (!config.bounds) throw InvalidArgument("train: theoretical variants need curvature bounds");
      schedule = theoretical_schedule(config.bounds->lipschitz, config.bounds->strong_convexity,
                                      variant == TrainVariant::sgdm_theoretical);
      lambda_max = config.bounds->lipschitz;
      lambda_b = config.bounds->strong_convexity;
      break;
    case TrainVariant::ssgd:
    case TrainVariant::ssgdm: break;
  }

  SeedStream root(config.seed);
  SeedStream batch_stream = root.split();
  SeedStream curvature_stream = root.split();
  const bool momentum = variant == TrainVariant::ssgdm;
  const std::size_t epoch = std::max<std::size_t>(1, train_set.n_samples / config.batch_size);
  const std::size_t batch_size = std::min(config.batch_size, train_set.n_samples);

  Vector p(model.params().begin(), model.params().end());
  HeavyBall optimizer(p);
  for (std::size_t t = 0; t < config.steps; ++t) {
    if (is_spectral(variant) && t % config.refresh_interval == 0) {
      const Batch curvature_batch =
          config.curvature_batch == 0 || config.curvature_batch >= train_set.n_samples
              ? full_batch(train_set)
              : sample_batch(train_set, config.curvature_batch, curvature_stream);
      SpectralRefresh r = spectral_refresh(model, curvature_batch, config, momentum, curvature_stream);
      for (const std::string& w : r.warnings) {
        trace.warnings.push_back("step " + std::to_string(t) + ": " + w);
      }
      schedule = r.schedule;
      lambda_max = r.lambda_max;
      lambda_b = r.lambda_b;
      trace.refreshes.push_back(std::move(r));
    }

    const Batch batch = sample_batch(train_set, batch_size, batch_stream);
    LossGradient lg;
    try {
      lg = model.loss_and_gradient(batch);
    } catch (const NumericalError&) {
      trace.diverged = true;
      break;
    }
    trace.steps.push_back({t, lg.loss, schedule.alpha, schedule.beta, lambda_max, lambda_b});
    if (!(lg.loss <= kDivergenceLoss)) {
      trace.diverged = true;
      break;
    }
    optimizer.step(p, lg.gradient, schedule);
    if (!std::all_of(p.begin(), p.end(), [](double x) { return std::isfinite(x); })) {
      trace.diverged = true;
      break;
    }
    model.set_params(p);
    if (validation != nullptr && (t + 1) % epoch == 0) {
      trace.validation_loss.push_back(model.loss(full_batch(*validation)));
    }
  }

  if (trace.diverged) {
    trace.final_train_loss = std::numeric_limits<double>::infinity();
    trace.warnings.push_back("training diverged at step " + std::to_string(trace.steps.size()));
  } else {
    trace.final_train_loss = model.loss(full_batch(train_set));
  }
  return trace;
}

Vector lanczos_newton_direction(const RitzDecomposition& ritz, std::span<const double> gradient,
                                double damping) {
  if (!ritz.vectors) {
    throw InvalidArgument("lanczos_newton_direction: Ritz vectors were not retained");
  }
  if (!(damping > 0.0)) throw InvalidArgument("lanczos_newton_direction: damping must be positive");
  const Basis& u = *ritz.vectors;
  if (u.dim() != gradient.size()) throw InvalidArgument("lanczos_newton_direction: dimension mismatch");

  const std::size_t k = u.count();
  Vector coeffs(k);
  kernels::project(u.data(), u.dim(), k, gradient, coeffs);
  Vector direction(gradient.begin(), gradient.end());
  kernels::subtract_combination(u.data(), u.dim(), k, coeffs, direction);
  kernels::scale(1.0 / damping, direction);
  for (std::size_t i = 0; i < k; ++i) {
    const double denom = ritz.values[i] + damping;
    if (!(denom > 0.0)) {
      throw InvalidArgument("lanczos_newton_direction: Ritz value " + std::to_string(ritz.values[i]) +
                            " makes the damped surrogate indefinite");
    }
    kernels::axpy(coeffs[i] / denom, u.column(i), direction);
  }
  return direction;
}

LossLandscape loss_landscape(const Model& model, const Dataset& train_set, const Dataset* test_set,
                             const RitzDecomposition& ritz, double dist, std::size_t n_points,
                             std::size_t per_side) {
  if (!ritz.vectors) {
    throw InvalidArgument("loss_landscape: Ritz vectors missing; rerun Lanczos with vector retention");
  }
  if (n_points % 2 == 0) throw InvalidArgument("loss_landscape: n_points must be odd");
  if (!(dist >= 0.0)) throw InvalidArgument("loss_landscape: dist must be non-negative");
  if (ritz.vectors->dim() != model.num_params()) {
    throw InvalidArgument("loss_landscape: Ritz vectors do not match the model");
  }

  LossLandscape out;
  const std::size_t m = ritz.values.size();
  // Largest first, then the smallest.
  for (std::size_t i = 0; i < std::min(per_side, m); ++i) {
    out.directions.push_back({m - 1 - i, ritz.values[m - 1 - i]});
  }
  for (std::size_t i = 0; i < std::min(per_side, m); ++i) {
    const bool taken = std::any_of(out.directions.begin(), out.directions.end(),
                                   [&](const LossLandscape::Direction& d) { return d.ritz_index == i; });
    if (!taken) out.directions.push_back({i, ritz.values[i]});
  }

  out.distances.resize(n_points);
  const auto half = static_cast<std::ptrdiff_t>(n_points / 2);
  for (std::size_t j = 0; j < n_points; ++j) {
    out.distances[j] = half == 0 ? 0.0
                                 : dist * static_cast<double>(static_cast<std::ptrdiff_t>(j) - half) /
                                       static_cast<double>(half);
  }

  const std::size_t cells = out.directions.size() * n_points;
  out.train_loss.assign(cells, 0.0);
  out.test_loss.assign(cells, std::numeric_limits<double>::quiet_NaN());
  const Batch train_batch = full_batch(train_set);
  const std::optional<Batch> test_batch =
      test_set != nullptr ? std::optional<Batch>(full_batch(*test_set)) : std::nullopt;
  const std::span<const double> base = model.params();

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t cc = 0; cc < static_cast<std::ptrdiff_t>(cells); ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    const LossLandscape::Direction& d = out.directions[c / n_points];
    const double t = out.distances[c % n_points];
    const std::span<const double> u = ritz.vectors->column(d.ritz_index);
    std::unique_ptr<Model> moved = model.clone();
    Vector p(base.begin(), base.end());
    if (t != 0.0) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] += t * u[i];
    }
    moved->set_params(p);
    out.train_loss[c] = moved->loss(train_batch);
    if (test_batch) out.test_loss[c] = moved->loss(*test_batch);
  }
  return out;
}

}  // namespace curvlens
