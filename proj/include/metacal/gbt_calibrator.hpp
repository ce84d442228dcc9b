#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "metacal/gbt.hpp"
#include "metacal/objectives.hpp"

namespace metacal {

/// Held-out row indices per fold. Pointwise rows are shuffled individually;
/// pairwise data is split by group so a pair never straddles folds.
/// Throws TooFewExamples when there are fewer rows (groups) than folds.
std::vector<std::vector<std::size_t>> assign_folds(const LabeledData& data, int folds, std::uint64_t seed);

/// Alignment of held-out predictions with held-out targets. Pairwise data is
/// always scored by pairwise accuracy; a constant prediction scores -1.
double holdout_objective(const LabeledData& test, std::span<const double> predictions, ObjectiveKind objective);

/// Mean over folds of the held-out objective for an n_estimators-tree model.
double cross_validate(const LabeledData& data, ObjectiveKind objective, const GbtConfig& config, int n_estimators);

/// CV objective for every value in `sizes` (ascending), sharing one boosting
/// run per fold.
std::vector<double> cross_validate_sizes(const LabeledData& data, ObjectiveKind objective, const GbtConfig& config,
                                         std::span<const int> sizes);

struct NEstimatorsSearch {
  int best = 0;
  double best_cv = 0.0;
  std::vector<std::pair<int, double>> evaluations;  // one per grid value
};

/// Grid search over config.n_estimators; ties resolve to the smallest size.
NEstimatorsSearch search_n_estimators(const LabeledData& data, ObjectiveKind objective, const GbtConfig& config);

struct PruneTrace {
  std::vector<double> performances;          // CV objective per iteration
  std::vector<std::size_t> pruned;           // original feature index dropped at each iteration
  std::vector<std::vector<double>> importances;  // gain per original feature index, per iteration
  std::size_t best_iteration = 0;            // 0-based argmax of performances
  std::vector<std::size_t> best_features;    // original indices, ascending
};

struct PruneResult {
  CalibratedModel model;
  PruneTrace trace;
  int n_estimators = 0;
  double final_cv = 0.0;  // CV objective of the returned configuration
};

/// Iteratively drops the least important feature, keeps the CV performance
/// history and retrains on the feature set of the best iteration. `specs`
/// describe the columns of `data` and the kept ones are stored in the model.
PruneResult iterative_prune(const LabeledData& data, ObjectiveKind objective, const GbtConfig& config,
                            std::size_t iterations, std::span<const MetricSpec> specs);

}  // namespace metacal
