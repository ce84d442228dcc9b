#include "metacal/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace metacal {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873127623544061835961152572427;

double matern_from_distance(double d, double lengthscale) {
  const double r = kSqrt5 * d / lengthscale;
  return (1.0 + r + r * r / 3.0) * std::exp(-r);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, double lengthscale) {
  const auto k = x.rows();
  Eigen::MatrixXd km(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    km(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = matern_from_distance((x.row(i) - x.row(j)).norm(), lengthscale);
      km(i, j) = v;
      km(j, i) = v;
    }
  }
  return km;
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  bool ok = false;
};

Factorization factorize(const Eigen::MatrixXd& km, double initial_jitter) {
  Factorization f;
  double jitter = initial_jitter;
  while (jitter <= GpConfig::max_jitter * (1.0 + 1e-12)) {
    Eigen::MatrixXd a = km;
    a.diagonal().array() += jitter;
    f.llt.compute(a);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      f.ok = true;
      return f;
    }
    jitter *= 10.0;
  }
  return f;
}

double lml_for(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lengthscale, double jitter) {
  const auto f = factorize(kernel_matrix(x, lengthscale), jitter);
  if (!f.ok) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const auto& l = f.llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) log_det += std::log(l(i, i));
  return -0.5 * y.dot(alpha) - log_det - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

// Log-spaced grid, then golden-section refinement from the 8 best grid points.
double maximize_lengthscale(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double jitter) {
  constexpr int kGrid = 25;
  constexpr int kRestarts = 8;
  constexpr double kLo = -2.0;  // log10 bounds
  constexpr double kHi = 2.0;
  const double step = (kHi - kLo) / (kGrid - 1);

  std::vector<double> grid(kGrid);
  std::vector<double> value(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    grid[static_cast<std::size_t>(i)] = kLo + step * i;
    value[static_cast<std::size_t>(i)] = lml_for(x, y, std::pow(10.0, grid[static_cast<std::size_t>(i)]), jitter);
  }
  std::vector<int> order(kGrid);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return value[static_cast<std::size_t>(a)] > value[static_cast<std::size_t>(b)];
  });

  double best_log = grid[static_cast<std::size_t>(order[0])];
  double best_val = value[static_cast<std::size_t>(order[0])];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int r = 0; r < kRestarts; ++r) {
    const int c = order[static_cast<std::size_t>(r)];
    double a = grid[static_cast<std::size_t>(std::max(c - 1, 0))];
    double b = grid[static_cast<std::size_t>(std::min(c + 1, kGrid - 1))];
    auto eval = [&](double lg) { return lml_for(x, y, std::pow(10.0, lg), jitter); };
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = eval(x1);
    double f2 = eval(x2);
    for (int it = 0; it < 30; ++it) {
      if (f1 >= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - inv_phi * (b - a);
        f1 = eval(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (b - a);
        f2 = eval(x2);
      }
    }
    const double lg = f1 >= f2 ? x1 : x2;
    const double v = std::max(f1, f2);
    if (v > best_val) {
      best_val = v;
      best_log = lg;
    }
  }
  return std::pow(10.0, best_log);
}

}  // namespace

void GpConfig::validate() const {
  if (init_points < 1) throw Error(ErrorKind::InvalidConfig, "init_points must be >= 1");
  if (n_iter < 0) throw Error(ErrorKind::InvalidConfig, "n_iter must be >= 0");
  if (!(kappa >= 0.0)) throw Error(ErrorKind::InvalidConfig, "kappa must be >= 0");
  if (!(noise_jitter > 0.0) || noise_jitter > max_jitter) {
    throw Error(ErrorKind::InvalidConfig, "noise_jitter must lie in (0, 1e-2]");
  }
  if (!(sparsity_epsilon >= 0.0 && sparsity_epsilon < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "sparsity_epsilon must lie in [0, 1)");
  }
}

double matern52(std::span<const double> w, std::span<const double> w_prime, double lengthscale) {
  if (w.size() != w_prime.size()) {
    throw Error(ErrorKind::DimensionMismatch, "kernel inputs have dimensions " + std::to_string(w.size()) + " and " +
                                                  std::to_string(w_prime.size()));
  }
  if (!(lengthscale > 0.0)) throw Error(ErrorKind::InvalidConfig, "lengthscale must be positive");
  return matern_from_distance(distance(w, w_prime), lengthscale);
}

GpSurrogate gp_fit(std::span<const WeightVector> weights, std::span<const double> alignments, const GpConfig& config,
                   std::optional<double> lengthscale) {
  if (weights.empty() || weights.size() != alignments.size()) {
    throw Error(ErrorKind::LengthMismatch, "gp_fit needs matching, non-empty weights and alignments");
  }
  GpSurrogate model;
  model.dim_ = weights.front().size();
  const auto k = static_cast<Eigen::Index>(weights.size());
  model.inputs_.resize(k, static_cast<Eigen::Index>(model.dim_));
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& w = weights[static_cast<std::size_t>(i)];
    if (w.size() != model.dim_) throw Error(ErrorKind::DimensionMismatch, "observed weights differ in dimension");
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(model.dim_); ++j) {
      model.inputs_(i, j) = w[static_cast<std::size_t>(j)];
    }
  }
  model.weights_.assign(weights.begin(), weights.end());
  model.alignments_.assign(alignments.begin(), alignments.end());

  const double n = static_cast<double>(k);
  double mean = 0.0;
  for (double r : alignments) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : alignments) var += (r - mean) * (r - mean);
  var /= n;
  model.target_mean_ = mean;
  model.target_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  model.standardized_.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    model.standardized_(i) = (alignments[static_cast<std::size_t>(i)] - mean) / model.target_scale_;
  }

  if (lengthscale) {
    if (!(*lengthscale > 0.0)) throw Error(ErrorKind::InvalidConfig, "lengthscale must be positive");
    model.lengthscale_ = *lengthscale;
  } else if (config.lengthscale_policy == LengthscalePolicy::MaximizeMarginalLikelihood && k > 1) {
    model.lengthscale_ = maximize_lengthscale(model.inputs_, model.standardized_, config.noise_jitter);
  } else {
    model.lengthscale_ = 1.0;
  }

  auto f = factorize(kernel_matrix(model.inputs_, model.lengthscale_), config.noise_jitter);
  if (!f.ok) {
    throw Error(ErrorKind::FactorizationFailure, "kernel matrix not positive definite even with jitter 1e-2");
  }
  model.factor_ = std::move(f.llt);
  model.jitter_ = f.jitter;
  model.alpha_ = model.factor_.solve(model.standardized_);
  return model;
}

GpPrediction GpSurrogate::predict(std::span<const double> w) const {
  const WeightVector point(w.begin(), w.end());
  return predict_batch(std::span<const WeightVector>(&point, 1)).front();
}

std::vector<GpPrediction> GpSurrogate::predict_batch(std::span<const WeightVector> points) const {
  const auto k = inputs_.rows();
  const auto c = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd cross(k, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    const auto& p = points[static_cast<std::size_t>(j)];
    if (p.size() != dim_) {
      throw Error(ErrorKind::DimensionMismatch, "query has dimension " + std::to_string(p.size()) + ", surrogate has " +
                                                    std::to_string(dim_));
    }
    const Eigen::Map<const Eigen::RowVectorXd> q(p.data(), static_cast<Eigen::Index>(dim_));
    for (Eigen::Index i = 0; i < k; ++i) {
      cross(i, j) = matern_from_distance((inputs_.row(i) - q).norm(), lengthscale_);
    }
  }
  const Eigen::VectorXd mean = cross.transpose() * alpha_;
  factor_.matrixL().solveInPlace(cross);
  const Eigen::VectorXd reduction = cross.colwise().squaredNorm().transpose();

  std::vector<GpPrediction> out(points.size());
  for (Eigen::Index j = 0; j < c; ++j) {
    const double var = std::max(1.0 - reduction(j), 0.0);
    out[static_cast<std::size_t>(j)] = {target_mean_ + target_scale_ * mean(j), target_scale_ * std::sqrt(var)};
  }
  return out;
}

double GpSurrogate::log_marginal_likelihood() const {
  const auto& l = factor_.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) log_det += std::log(l(i, i));
  return -0.5 * standardized_.dot(alpha_) - log_det -
         0.5 * static_cast<double>(standardized_.size()) * std::log(2.0 * std::numbers::pi);
}

GpPrediction gp_predict(const GpSurrogate& model, std::span<const double> w) { return model.predict(w); }

std::vector<WeightVector> generate_candidates(const GpSurrogate& model, std::mt19937_64& rng) {
  const std::size_t dim = model.dimension();
  std::uniform_real_distribution<double> uniform(GpConfig::lower_bound, GpConfig::upper_bound);
  std::normal_distribution<double> step(0.0, GpConfig::local_step * (GpConfig::upper_bound - GpConfig::lower_bound));

  std::vector<WeightVector> candidates;
  candidates.reserve(GpConfig::random_candidates + GpConfig::local_candidates);
  for (int i = 0; i < GpConfig::random_candidates; ++i) {
    WeightVector w(dim);
    for (auto& v : w) v = uniform(rng);
    candidates.push_back(std::move(w));
  }

  const auto& rho = model.observed_alignments();
  const auto best = static_cast<std::size_t>(std::distance(rho.begin(), std::max_element(rho.begin(), rho.end())));
  const auto& incumbent = model.observed_weights()[best];
  for (int i = 0; i < GpConfig::local_candidates; ++i) {
    WeightVector w(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      w[d] = std::clamp(incumbent[d] + step(rng), GpConfig::lower_bound, GpConfig::upper_bound);
    }
    candidates.push_back(std::move(w));
  }
  return candidates;
}

WeightVector suggest_next(const GpSurrogate& model, const GpConfig& config, std::mt19937_64& rng) {
  auto candidates = generate_candidates(model, rng);
  const auto predictions = model.predict_batch(candidates);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double ucb = predictions[i].mean + config.kappa * predictions[i].std;
    if (ucb > best_score) {
      best_score = ucb;
      best = i;
    }
  }
  return std::move(candidates[best]);
}

std::vector<double> expand_features(std::span<const double> y, Weighting weighting) {
  const std::size_t n = y.size();
  if (n == 0) throw Error(ErrorKind::TooFewMetrics, "no metrics to expand");
  if (weighting == Weighting::LinearOnly) return {y.begin(), y.end()};
  if (weighting == Weighting::Multiplicative && n < 2) {
    throw Error(ErrorKind::TooFewMetrics, "pairwise products need at least two metrics");
  }

  std::vector<double> out;
  out.reserve(weighting_dimension(weighting, n));
  if (weighting == Weighting::Combined) out.assign(y.begin(), y.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.push_back(y[i] * y[j]);
  }
  return out;
}

}  // namespace metacal
