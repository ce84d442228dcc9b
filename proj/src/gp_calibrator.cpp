#include "metacal/gp_calibrator.hpp"

#include <algorithm>
#include <numeric>

namespace metacal {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<WeightVector> seeded_design(std::size_t dim) {
  std::vector<WeightVector> design;
  design.emplace_back(dim, 1.0 / static_cast<double>(dim));
  if (dim > 1) {
    for (std::size_t i = 0; i < dim; ++i) {
      WeightVector e(dim, 0.0);
      e[i] = 1.0;
      design.push_back(std::move(e));
    }
  }
  return design;
}

}  // namespace

WeightObjective::WeightObjective(const ScoreMatrix& normalized, const PreferenceTarget& target,
                                 ObjectiveKind objective, Weighting weighting)
    : objective_(objective) {
  validate_alignment(normalized, target);
  const std::size_t n = normalized.num_metrics();
  if (n == 0) throw Error(ErrorKind::TooFewMetrics, "calibration needs at least one metric");
  dim_ = weighting_dimension(weighting, n);
  if (dim_ == 0) throw Error(ErrorKind::TooFewMetrics, "pairwise products need at least two metrics");

  if (target.kind == TargetKind::Pairwise) {
    objective_ = ObjectiveKind::PairwiseAccuracy;
    if (target.pairwise.empty()) throw Error(ErrorKind::EmptyInput, "no preference pairs");
    for (const auto& p : target.pairwise) {
      chosen_.push_back(expand_features(p.chosen, weighting));
      rejected_.push_back(expand_features(p.rejected, weighting));
    }
    return;
  }
  if (objective == ObjectiveKind::PairwiseAccuracy) {
    throw Error(ErrorKind::InvalidConfig, "pairwise objective requires pairwise targets");
  }
  z_ = target.aligned_scores(normalized);
  for (const auto& row : normalized.rows()) features_.push_back(expand_features(row.scores, weighting));
}

double WeightObjective::operator()(std::span<const double> weights) const {
  if (weights.size() != dim_) throw Error(ErrorKind::DimensionMismatch, "weight vector has wrong dimension");
  if (objective_ == ObjectiveKind::PairwiseAccuracy) {
    std::vector<ScoredPair> pairs(chosen_.size());
    for (std::size_t i = 0; i < chosen_.size(); ++i) {
      pairs[i] = {dot(weights, chosen_[i]), dot(weights, rejected_[i])};
    }
    return pairwise_accuracy(pairs);
  }
  std::vector<double> meta(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) meta[i] = dot(weights, features_[i]);
  try {
    return correlation_objective(objective_, meta, z_);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DegenerateInput) return -1.0;
    throw;
  }
}

GpCalibration calibrate_gp(const ScoreMatrix& normalized, const PreferenceTarget& target, ObjectiveKind objective,
                           const GpConfig& config, std::span<const MetricSpec> specs) {
  config.validate();
  if (specs.size() != normalized.num_metrics()) {
    throw Error(ErrorKind::SpecMismatch, "metric specs do not match matrix columns");
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].name != normalized.metric_names()[i]) {
      throw Error(ErrorKind::SpecMismatch, "spec '" + specs[i].name + "' does not match column '" +
                                               normalized.metric_names()[i] + "'");
    }
  }
  const WeightObjective evaluate(normalized, target, objective, config.weighting);
  const std::size_t dim = evaluate.dimension();

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(GpConfig::lower_bound, GpConfig::upper_bound);

  auto design = seeded_design(dim);
  const auto requested = static_cast<std::size_t>(config.init_points);
  while (design.size() < requested) {
    WeightVector w(dim);
    for (auto& v : w) v = uniform(rng);
    design.push_back(std::move(w));
  }

  GpCalibration result;
  std::vector<WeightVector> observed;
  std::vector<double> rho;
  auto record = [&](WeightVector w) {
    const double value = evaluate(w);
    observed.push_back(w);
    rho.push_back(value);
    result.history.push_back(Observation{std::move(w), value});
  };
  for (auto& w : design) record(std::move(w));

  std::optional<double> lengthscale;
  std::size_t fitted_at = 0;
  for (int step = 0; step < config.n_iter; ++step) {
    const bool refit = config.lengthscale_policy == LengthscalePolicy::MaximizeMarginalLikelihood &&
                       (!lengthscale || observed.size() >= fitted_at + GpConfig::refit_interval);
    std::optional<double> fixed = refit ? std::nullopt : lengthscale;
    const auto surrogate = gp_fit(observed, rho, config, fixed);
    if (refit || !lengthscale) {
      lengthscale = surrogate.lengthscale();
      fitted_at = observed.size();
    }
    record(suggest_next(surrogate, config, rng));
  }

  // First occurrence wins so seeded baselines keep priority on ties.
  const auto best_it = std::max_element(rho.begin(), rho.end());
  result.best_index = static_cast<std::size_t>(std::distance(rho.begin(), best_it));
  result.best_objective = *best_it;

  auto& model = result.model;
  model.kind = ModelKind::Linear;
  model.metric_specs.assign(specs.begin(), specs.end());
  model.weighting = config.weighting;
  model.weights = observed[result.best_index];
  model.objective_used = std::string(to_string(evaluate.effective_objective()));
  model.seed = config.seed;
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    if (model.weights[i] < config.sparsity_epsilon) result.dropped.push_back(i);
  }
  return result;
}

std::vector<std::size_t> select_top_k(const ScoreMatrix& normalized, const PreferenceTarget& target,
                                      ObjectiveKind objective, std::size_t k) {
  const std::size_t n = normalized.num_metrics();
  if (k < 1 || k > n) {
    throw Error(ErrorKind::InvalidConfig, "top-k requires 1 <= k <= " + std::to_string(n));
  }
  std::vector<double> score(n);
  for (std::size_t m = 0; m < n; ++m) {
    const auto single = normalized.select_metrics(std::span<const std::size_t>(&m, 1));
    PreferenceTarget t = target;
    if (t.kind == TargetKind::Pairwise) {
      for (auto& p : t.pairwise) {
        p.chosen = {p.chosen.at(m)};
        p.rejected = {p.rejected.at(m)};
      }
    }
    const WeightObjective evaluate(single, t, objective, Weighting::LinearOnly);
    const double w = 1.0;
    score[m] = evaluate(std::span<const double>(&w, 1));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace metacal
