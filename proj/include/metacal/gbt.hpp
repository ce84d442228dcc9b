#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metacal/core_types.hpp"

namespace metacal {

enum class GbtLoss { SquaredError, AbsoluteError, SquaredLogError, PairwiseRank };

std::string_view to_string(GbtLoss loss);
GbtLoss parse_gbt_loss(std::string_view s);

/// Inclusive grid {low, low + step, ..., high} of ensemble sizes.
struct NEstimatorsGrid {
  int low = 100;
  int high = 1000;
  int step = 100;

  [[nodiscard]] std::vector<int> values() const;
  void validate() const;
};

struct GbtConfig {
  NEstimatorsGrid n_estimators;
  GbtLoss loss = GbtLoss::SquaredError;
  int max_depth = 6;
  double learning_rate = 0.1;
  double lambda = 1.0;  // L2 on leaf values
  double gamma = 0.0;   // per-split penalty
  int cv_folds = 5;
  std::uint64_t seed = 0;
  // Unset: mean target for regression losses, 0 for PairwiseRank.
  std::optional<double> base_score;

  /// Smaller grid used for QA-style tasks: 100..400 step 25.
  static GbtConfig qa_preset();
  void validate() const;
};

/// Dense row-major feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

struct RankPair {
  std::size_t chosen = 0;
  std::size_t rejected = 0;
};

/// Training examples for the boosted calibrator. Pointwise data carries a
/// target per row; pairwise data carries chosen/rejected row pairs, with
/// y = 1 for chosen and 0 for rejected rows so regression losses still apply.
struct LabeledData {
  TargetKind kind = TargetKind::Pointwise;
  FeatureMatrix x;
  std::vector<double> y;
  std::vector<std::string> groups;  // per row
  std::vector<RankPair> pairs;      // pairwise kind only
  std::vector<std::string> feature_names;

  [[nodiscard]] LabeledData select_rows(std::span<const std::size_t> rows) const;
  [[nodiscard]] LabeledData select_features(std::span<const std::size_t> features) const;
  void validate() const;
};

/// Pointwise rows become examples grouped by dataset; each preference pair
/// becomes two rows (chosen first).
LabeledData make_labeled_data(const ScoreMatrix& normalized, const PreferenceTarget& target);

/// Per-round record of the boosting state, for diagnostics and tests.
struct TrainTrace {
  std::vector<std::vector<double>> gradients;    // before each tree
  std::vector<std::vector<double>> hessians;     // before each tree
  std::vector<std::vector<double>> predictions;  // after each tree
};

/// Second-order boosting with exact greedy splits. Deterministic: no row or
/// column sampling, so the first t trees of an n-tree ensemble equal a t-tree
/// ensemble trained with the same config.
TreeEnsemble gbt_train(const LabeledData& data, const GbtConfig& config, int n_estimators,
                       TrainTrace* trace = nullptr);

/// Prediction using only the first `n_trees` trees.
double predict_prefix(const TreeEnsemble& model, std::span<const double> x, std::size_t n_trees);

/// Total split gain per feature index; unused features get 0.
std::vector<double> feature_gains(const TreeEnsemble& model);

/// Total split gain keyed by feature name.
std::map<std::string, double> feature_importance(const TreeEnsemble& model);

/// Split gain from raw gradient/hessian sums of the two children.
double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda, double gamma);

}  // namespace metacal
