#pragma once

#include <span>
#include <vector>

#include "metacal/core_types.hpp"

namespace metacal {

/// Column-ordered metric ranges used to map raw scores onto [0,1].
struct PreprocessConfig {
  std::vector<MetricSpec> specs;

  /// Rejects degenerate ranges and duplicate names.
  void validate() const;
};

/// Clip to [min,max], rescale to [0,1], then flip lower-is-better metrics.
double normalize_score(double raw, const MetricSpec& spec);

std::vector<double> normalize_vector(std::span<const double> raw, std::span<const MetricSpec> specs);

/// Element-wise normalize_score. Throws SpecMismatch when the config does not
/// line up with the matrix columns.
ScoreMatrix normalize_matrix(const ScoreMatrix& matrix, const PreprocessConfig& config);

/// Normalizes the chosen/rejected vectors of a pairwise target; pointwise targets pass through.
PreferenceTarget normalize_target(const PreferenceTarget& target, const PreprocessConfig& config);

}  // namespace metacal
