#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "metacal/core_types.hpp"
#include "metacal/io.hpp"

namespace metacal {

/// Meta score per row of a raw (un-normalized) matrix. Columns are matched to
/// the model's metrics by name; extra columns are ignored. Throws ColumnMismatch.
std::vector<double> score_with_model(const CalibratedModel& model, const ScoreMatrix& raw);

struct TrainTestSplit {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Seeded shuffle, then floor(fraction * n) rows go to train.
TrainTestSplit split_train_test(std::size_t n, double fraction = 0.30, std::uint64_t seed = 0);

struct WeightEntry {
  std::string feature;  // metric name, or "a*b" for product terms
  double weight = 0.0;
};

struct ModelReport {
  ModelKind kind = ModelKind::Linear;
  std::vector<WeightEntry> weights;       // linear: in weight order
  std::vector<std::string> dropped;       // linear: features with weight < epsilon
  std::vector<WeightEntry> importances;   // gbt: total gain, descending
  double epsilon = 0.01;
};

/// Feature labels of an expanded weight vector, in weight order.
std::vector<std::string> expanded_feature_names(const std::vector<std::string>& metrics, Weighting weighting);

ModelReport report_model(const CalibratedModel& model, double epsilon = 0.01);
Json report_to_json(const ModelReport& report);
std::string report_to_text(const ModelReport& report);

}  // namespace metacal
