#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "metacal/core_types.hpp"
#include "metacal/gp.hpp"
#include "metacal/objectives.hpp"

namespace metacal {

struct Observation {
  WeightVector weights;
  double objective = 0.0;
};

struct GpCalibration {
  CalibratedModel model;
  std::vector<Observation> history;  // every objective evaluation, in order
  std::size_t best_index = 0;
  double best_objective = 0.0;
  std::vector<std::size_t> dropped;  // weight indices below sparsity_epsilon
};

/// Scores a weight vector against the target. Pointwise targets use the
/// correlation objective on w . features; pairwise targets use pairwise
/// accuracy. A constant meta-metric scores -1.
class WeightObjective {
 public:
  WeightObjective(const ScoreMatrix& normalized, const PreferenceTarget& target, ObjectiveKind objective,
                  Weighting weighting);

  [[nodiscard]] double operator()(std::span<const double> weights) const;
  [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
  [[nodiscard]] ObjectiveKind effective_objective() const noexcept { return objective_; }

 private:
  ObjectiveKind objective_;
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> features_;
  std::vector<double> z_;
  std::vector<std::vector<double>> chosen_;
  std::vector<std::vector<double>> rejected_;
};

/// Bayesian optimization of metric weights. The uniform vector and every
/// one-hot vector are always part of the initial design; random points fill
/// the rest of init_points. Total evaluations are
/// max(init_points, D + 1) + n_iter for a D-dimensional weight space (D > 1).
/// `specs` describe the columns of `normalized` and are stored in the model.
GpCalibration calibrate_gp(const ScoreMatrix& normalized, const PreferenceTarget& target, ObjectiveKind objective,
                           const GpConfig& config, std::span<const MetricSpec> specs);

/// Indices (ascending column order) of the k metrics that individually score
/// best against the target. Ties keep the earlier column.
std::vector<std::size_t> select_top_k(const ScoreMatrix& normalized, const PreferenceTarget& target,
                                      ObjectiveKind objective, std::size_t k);

}  // namespace metacal
