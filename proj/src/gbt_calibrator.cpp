#include "metacal/gbt_calibrator.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace metacal {

std::vector<std::vector<std::size_t>> assign_folds(const LabeledData& data, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::InvalidConfig, "cross-validation needs at least 2 folds");
  const auto k = static_cast<std::size_t>(folds);
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> out(k);

  if (data.kind == TargetKind::Pairwise) {
    const std::set<std::string> unique(data.groups.begin(), data.groups.end());
    std::vector<std::string> groups(unique.begin(), unique.end());
    if (groups.size() < k) {
      throw Error(ErrorKind::TooFewExamples, std::to_string(groups.size()) + " groups for " + std::to_string(k) +
                                                 " folds");
    }
    std::shuffle(groups.begin(), groups.end(), rng);
    std::map<std::string, std::size_t> fold_of;
    for (std::size_t i = 0; i < groups.size(); ++i) fold_of[groups[i]] = i % k;
    for (std::size_t r = 0; r < data.groups.size(); ++r) out[fold_of[data.groups[r]]].push_back(r);
    return out;
  }

  if (data.x.rows < k) {
    throw Error(ErrorKind::TooFewExamples, std::to_string(data.x.rows) + " examples for " + std::to_string(k) +
                                               " folds");
  }
  std::vector<std::size_t> rows(data.x.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::shuffle(rows.begin(), rows.end(), rng);
  for (std::size_t i = 0; i < rows.size(); ++i) out[i % k].push_back(rows[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

double holdout_objective(const LabeledData& test, std::span<const double> predictions, ObjectiveKind objective) {
  if (test.kind == TargetKind::Pairwise) {
    std::vector<ScoredPair> pairs;
    pairs.reserve(test.pairs.size());
    for (const auto& p : test.pairs) pairs.push_back({predictions[p.chosen], predictions[p.rejected]});
    return pairwise_accuracy(pairs);
  }
  try {
    return correlation_objective(objective, predictions, test.y);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DegenerateInput) return -1.0;
    throw;
  }
}

std::vector<double> cross_validate_sizes(const LabeledData& data, ObjectiveKind objective, const GbtConfig& config,
                                         std::span<const int> sizes) {
  config.validate();
  if (sizes.empty()) return {};
  if (data.kind == TargetKind::Pointwise && objective == ObjectiveKind::PairwiseAccuracy) {
    throw Error(ErrorKind::InvalidConfig, "pairwise objective requires pairwise targets");
  }
  const auto folds = assign_folds(data, config.cv_folds, config.seed);
  const int largest = *std::max_element(sizes.begin(), sizes.end());

  std::vector<double> totals(sizes.size(), 0.0);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    const auto train = data.select_rows(train_rows);
    const auto test = data.select_rows(folds[f]);
    const auto model = gbt_train(train, config, largest);
    std::vector<double> pred(test.x.rows);
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      for (std::size_t i = 0; i < test.x.rows; ++i) {
        pred[i] = predict_prefix(model, test.x.row(i), static_cast<std::size_t>(sizes[s]));
      }
      totals[s] += holdout_objective(test, pred, objective);
    }
  }
  for (auto& t : totals) t /= static_cast<double>(folds.size());
  return totals;
}

double cross_validate(const LabeledData& data, ObjectiveKind objective, const GbtConfig& config, int n_estimators) {
  const int sizes[] = {n_estimators};
  return cross_validate_sizes(data, objective, config, sizes).front();
}

NEstimatorsSearch search_n_estimators(const LabeledData& data, ObjectiveKind objective, const GbtConfig& config) {
  const auto grid = config.n_estimators.values();
  const auto scores = cross_validate_sizes(data, objective, config, grid);
  NEstimatorsSearch out;
  out.best = grid.front();
  out.best_cv = scores.front();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.evaluations.emplace_back(grid[i], scores[i]);
    if (scores[i] > out.best_cv) {
      out.best_cv = scores[i];
      out.best = grid[i];
    }
  }
  return out;
}

PruneResult iterative_prune(const LabeledData& data, ObjectiveKind objective, const GbtConfig& config,
                            std::size_t iterations, std::span<const MetricSpec> specs) {
  data.validate();
  const std::size_t n_features = data.x.cols;
  if (specs.size() != n_features) throw Error(ErrorKind::SpecMismatch, "specs do not match feature columns");
  if (iterations < 1 || iterations > n_features) {
    throw Error(ErrorKind::InvalidConfig, "prune iterations must lie in [1, " + std::to_string(n_features) + "]");
  }

  PruneResult result;
  auto& trace = result.trace;
  std::vector<std::size_t> current(n_features);
  std::iota(current.begin(), current.end(), std::size_t{0});

  for (std::size_t it = 0; it < iterations && !current.empty(); ++it) {
    const auto subset = data.select_features(current);
    const auto search = search_n_estimators(subset, objective, config);
    trace.performances.push_back(search.best_cv);

    const auto model = gbt_train(subset, config, search.best);
    const auto gains = feature_gains(model);
    std::vector<double> full(n_features, 0.0);
    for (std::size_t j = 0; j < current.size(); ++j) full[current[j]] = gains[j];
    trace.importances.push_back(std::move(full));

    const auto least = static_cast<std::size_t>(std::distance(gains.begin(), std::min_element(gains.begin(), gains.end())));
    trace.pruned.push_back(current[least]);
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(least));
  }

  const auto& perf = trace.performances;
  trace.best_iteration = static_cast<std::size_t>(std::distance(perf.begin(), std::max_element(perf.begin(), perf.end())));
  trace.best_features = current;
  trace.best_features.insert(trace.best_features.end(),
                             trace.pruned.begin() + static_cast<std::ptrdiff_t>(trace.best_iteration),
                             trace.pruned.end());
  std::sort(trace.best_features.begin(), trace.best_features.end());

  const auto best_data = data.select_features(trace.best_features);
  const auto search = search_n_estimators(best_data, objective, config);
  result.n_estimators = search.best;
  result.final_cv = search.best_cv;

  auto& model = result.model;
  model.kind = ModelKind::Gbt;
  for (auto f : trace.best_features) model.metric_specs.push_back(specs[f]);
  model.trees = gbt_train(best_data, config, search.best);
  model.objective_used =
      std::string(to_string(data.kind == TargetKind::Pairwise ? ObjectiveKind::PairwiseAccuracy : objective));
  model.seed = config.seed;
  return result;
}

}  // namespace metacal
