#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "metacal/core_types.hpp"

namespace metacal {

enum class LengthscalePolicy { FixedOne, MaximizeMarginalLikelihood };

struct GpConfig {
  int init_points = 5;
  int n_iter = 100;
  double kappa = 2.576;  // UCB exploration weight
  double noise_jitter = 1e-6;
  LengthscalePolicy lengthscale_policy = LengthscalePolicy::FixedOne;
  std::uint64_t seed = 0;
  Weighting weighting = Weighting::LinearOnly;
  double sparsity_epsilon = 0.01;

  // Weights live in [lower_bound, upper_bound]^D.
  static constexpr double lower_bound = 0.0;
  static constexpr double upper_bound = 1.0;
  static constexpr int random_candidates = 1000;
  static constexpr int local_candidates = 10;
  static constexpr double local_step = 0.1;
  static constexpr double max_jitter = 1e-2;
  static constexpr int refit_interval = 10;

  void validate() const;
};

using WeightVector = std::vector<double>;

/// Matern nu = 5/2 on Euclidean distance, unit signal variance.
double matern52(std::span<const double> w, std::span<const double> w_prime, double lengthscale);

struct GpPrediction {
  double mean = 0.0;
  double std = 0.0;
};

/// Zero-mean GP over standardized alignments. Predictions are reported in the
/// original alignment units.
class GpSurrogate {
 public:
  [[nodiscard]] const std::vector<WeightVector>& observed_weights() const noexcept { return weights_; }
  [[nodiscard]] const std::vector<double>& observed_alignments() const noexcept { return alignments_; }
  [[nodiscard]] double lengthscale() const noexcept { return lengthscale_; }
  /// Diagonal jitter that made the kernel matrix factorizable.
  [[nodiscard]] double jitter() const noexcept { return jitter_; }
  [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
  [[nodiscard]] double target_mean() const noexcept { return target_mean_; }
  [[nodiscard]] double target_scale() const noexcept { return target_scale_; }
  [[nodiscard]] double prior_variance() const noexcept { return target_scale_ * target_scale_; }

  [[nodiscard]] GpPrediction predict(std::span<const double> w) const;
  [[nodiscard]] std::vector<GpPrediction> predict_batch(std::span<const WeightVector> points) const;

  /// Log evidence of the standardized targets under the current lengthscale.
  [[nodiscard]] double log_marginal_likelihood() const;

 private:
  friend GpSurrogate gp_fit(std::span<const WeightVector>, std::span<const double>, const GpConfig&,
                            std::optional<double>);

  std::vector<WeightVector> weights_;
  std::vector<double> alignments_;
  std::size_t dim_ = 0;
  double lengthscale_ = 1.0;
  double jitter_ = 0.0;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
  Eigen::MatrixXd inputs_;      // k x D
  Eigen::VectorXd standardized_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  Eigen::VectorXd alpha_;       // (K + jitter I)^-1 y
};

/// Fits the surrogate. A supplied lengthscale overrides the config policy.
/// Throws FactorizationFailure when jitter escalation up to 1e-2 cannot make
/// the kernel matrix positive definite.
GpSurrogate gp_fit(std::span<const WeightVector> weights, std::span<const double> alignments, const GpConfig& config,
                   std::optional<double> lengthscale = std::nullopt);

GpPrediction gp_predict(const GpSurrogate& model, std::span<const double> w);

/// Random points in the box followed by Gaussian steps around the incumbent.
std::vector<WeightVector> generate_candidates(const GpSurrogate& model, std::mt19937_64& rng);

/// UCB argmax over generate_candidates; first candidate wins ties.
WeightVector suggest_next(const GpSurrogate& model, const GpConfig& config, std::mt19937_64& rng);

/// Linear: y. Multiplicative: y_i * y_j for i < j. Combined: both, linear first.
std::vector<double> expand_features(std::span<const double> y, Weighting weighting);

}  // namespace metacal
