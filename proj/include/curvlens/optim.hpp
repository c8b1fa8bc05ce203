#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curvlens/dataset.hpp"
#include "curvlens/lanczos.hpp"
#include "curvlens/models.hpp"

namespace curvlens {

enum class ScheduleSource { ssgd, ssgdm, theoretical, fixed };

std::string_view to_string(ScheduleSource source);

struct SpectralSchedule {
  double alpha = 0.0;
  double beta = 0.0;
  ScheduleSource source = ScheduleSource::fixed;
};

/// alpha = 2 / (lambda_max + lambda_b), beta = 0.
SpectralSchedule ssgd_schedule(double lambda_max, double lambda_b);
/// Heavy-ball optimum for spectrum [lambda_b, lambda_max]:
/// alpha = (2 / (sqrt(lmax) + sqrt(lb)))^2, beta = ((sqrt(lmax) - sqrt(lb)) / (sqrt(lmax) + sqrt(lb)))^2.
SpectralSchedule ssgdm_schedule(double lambda_max, double lambda_b);
/// The same formulas fed with the smoothness and strong-convexity constants.
SpectralSchedule theoretical_schedule(double lipschitz, double strong_convexity, bool with_momentum);
SpectralSchedule fixed_schedule(double alpha, double beta);

/// p_{t+1} = p_t - alpha g_t + beta (p_t - p_{t-1}).
class HeavyBall {
 public:
  explicit HeavyBall(std::span<const double> start);
  void step(std::span<double> p, std::span<const double> gradient, const SpectralSchedule& s);

 private:
  Vector previous_;
};

enum class TrainVariant { ssgd, ssgdm, sgd_fixed, sgdm_fixed, sgd_theoretical, sgdm_theoretical };

std::string_view to_string(TrainVariant variant);
TrainVariant parse_train_variant(std::string_view name);
bool is_spectral(TrainVariant variant);

enum class BulkSeed { random_vector, gradient };

std::string_view to_string(BulkSeed seed);
BulkSeed parse_bulk_seed(std::string_view name);

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t steps = 2000;
  std::size_t lanczos_steps = 30;
  std::size_t refresh_interval = 100;
  /// Samples used for the curvature operator at each refresh; 0 uses the full training set.
  std::size_t curvature_batch = 0;
  CurvatureKind curvature = CurvatureKind::ggn;
  BulkSeed bulk_seed = BulkSeed::random_vector;
  ProbeKind probe = ProbeKind::rademacher;
  /// Outliers dropped by the bulk estimators; defaults to the model's layer count.
  std::optional<std::size_t> layers;
  double alpha = 0.01;  ///< fixed variants
  double beta = 0.9;    ///< sgdm_fixed
  std::optional<CurvatureBounds> bounds;  ///< theoretical variants
  std::uint64_t seed = 0;

  void validate() const;
};

struct SpectralRefresh {
  double lambda_max = 0.0;
  double lambda_b = 0.0;
  SpectralSchedule schedule;
  std::vector<std::string> warnings;
};

/// Lanczos from `seed` on a positive-definite curvature operator: lambda_max
/// is the top Ritz value, lambda_b comes from the configured bulk estimator.
SpectralRefresh spectral_refresh(const SymmetricOperator& op, std::span<const double> seed,
                                 std::size_t steps, std::size_t layers, BulkSeed method,
                                 bool momentum);

/// Builds the curvature operator of `model` on `batch` and picks the seed
/// (a probe from `stream` or the batch gradient) per `config`.
SpectralRefresh spectral_refresh(const Model& model, const Batch& batch, const TrainConfig& config,
                                 bool momentum, SeedStream& stream);

struct StepRecord {
  std::size_t step;
  double loss;
  double alpha;
  double beta;
  double lambda_max;  ///< NaN when the variant has no curvature estimate
  double lambda_b;
};

struct TrainTrace {
  TrainVariant variant = TrainVariant::ssgd;
  std::vector<StepRecord> steps;
  std::vector<SpectralRefresh> refreshes;
  std::vector<double> validation_loss;  ///< one entry per epoch
  double final_train_loss = 0.0;
  bool diverged = false;
  std::vector<std::string> warnings;
};

inline constexpr double kDivergenceLoss = 1e10;

/// Minibatch heavy-ball training. Spectral variants refresh (alpha, beta)
/// every refresh_interval steps starting at step 0. A loss above 1e10 or a
/// non-finite value stops training with `diverged` set.
TrainTrace train(Model& model, const Dataset& train_set, const Dataset* validation,
                 const TrainConfig& config, TrainVariant variant);

/// Damped Newton step in the Ritz subspace:
/// d = sum_i u_i (u_i'g) / (theta_i + delta) + (g - sum_i u_i (u_i'g)) / delta.
Vector lanczos_newton_direction(const RitzDecomposition& ritz, std::span<const double> gradient,
                                double damping);

struct LossLandscape {
  struct Direction {
    std::size_t ritz_index;
    double eigenvalue;
  };
  std::vector<Direction> directions;
  Vector distances;
  std::vector<double> train_loss;  ///< directions x distances, row-major
  std::vector<double> test_loss;   ///< same layout; NaN without a held-out set
};

/// Loss along p + t u_i on a symmetric grid of `n_points` (odd) values in
/// [-dist, dist], for the top and bottom `per_side` Ritz directions.
LossLandscape loss_landscape(const Model& model, const Dataset& train_set, const Dataset* test_set,
                             const RitzDecomposition& ritz, double dist, std::size_t n_points,
                             std::size_t per_side = 6);

}  // namespace curvlens
