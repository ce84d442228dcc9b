#include "metacal/preprocess.hpp"

#include <algorithm>

namespace metacal {

void PreprocessConfig::validate() const { validate_metric_set(specs); }

double normalize_score(double raw, const MetricSpec& spec) {
  const double clipped = std::clamp(raw, spec.min, spec.max);
  double v = (clipped - spec.min) / (spec.max - spec.min);
  // Rounding can push the quotient a hair past 1 for extreme ranges.
  v = std::clamp(v, 0.0, 1.0);
  return spec.higher_is_better ? v : 1.0 - v;
}

std::vector<double> normalize_vector(std::span<const double> raw, std::span<const MetricSpec> specs) {
  if (raw.size() != specs.size()) {
    throw Error(ErrorKind::SpecMismatch, "score vector has " + std::to_string(raw.size()) + " entries, config has " +
                                             std::to_string(specs.size()) + " specs");
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = normalize_score(raw[i], specs[i]);
  return out;
}

ScoreMatrix normalize_matrix(const ScoreMatrix& matrix, const PreprocessConfig& config) {
  config.validate();
  if (config.specs.size() != matrix.num_metrics()) {
    throw Error(ErrorKind::SpecMismatch, "matrix has " + std::to_string(matrix.num_metrics()) +
                                             " columns but config declares " + std::to_string(config.specs.size()));
  }
  for (std::size_t i = 0; i < config.specs.size(); ++i) {
    if (config.specs[i].name != matrix.metric_names()[i]) {
      throw Error(ErrorKind::SpecMismatch, "column " + std::to_string(i) + " is '" + matrix.metric_names()[i] +
                                               "' but spec is '" + config.specs[i].name + "'");
    }
  }
  std::vector<ScoreRow> rows;
  rows.reserve(matrix.num_rows());
  for (const auto& row : matrix.rows()) {
    rows.push_back(ScoreRow{row.id, normalize_vector(row.scores, config.specs)});
  }
  return ScoreMatrix(matrix.metric_names(), std::move(rows));
}

PreferenceTarget normalize_target(const PreferenceTarget& target, const PreprocessConfig& config) {
  if (target.kind == TargetKind::Pointwise) return target;
  config.validate();
  auto out = target;
  for (auto& pair : out.pairwise) {
    if (pair.chosen.size() != config.specs.size() || pair.rejected.size() != config.specs.size()) {
      throw Error(ErrorKind::ArityMismatch, pair.group);
    }
    pair.chosen = normalize_vector(pair.chosen, config.specs);
    pair.rejected = normalize_vector(pair.rejected, config.specs);
  }
  return out;
}

}  // namespace metacal
