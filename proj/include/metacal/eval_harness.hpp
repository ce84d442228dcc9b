#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metacal/objectives.hpp"

namespace metacal {

using Cell = std::pair<std::string, std::string>;  // (system, segment)

/// Metric and human scores of one dataset over a possibly ragged
/// system x segment grid. Only cells present in both maps are used.
struct DatasetScores {
  std::map<Cell, double> metric;
  std::map<Cell, double> human;
};

struct GroupedScores {
  std::map<std::string, DatasetScores> datasets;

  void add(const std::string& dataset, const std::string& system, const std::string& segment, double metric_score,
           double human_score);
};

enum class AccTiePolicy {
  Strict,     // metric-mean ties earn 0
  HalfCredit  // metric-mean ties earn 1/2
};

/// Per-system mean of metric vs human scores, then Pearson.
double sys_pearson(const GroupedScores& g, const std::string& dataset);

/// Pearson over the flattened cells present in both grids.
double seg_pearson(const GroupedScores& g, const std::string& dataset);

/// Share of system pairs with distinct human means that the metric means
/// order the same way. Throws NoRankablePairs when all human means tie.
double acc_t(const GroupedScores& g, const std::string& dataset, AccTiePolicy policy = AccTiePolicy::Strict);

struct DatasetStats {
  std::optional<double> sys_pearson;
  std::optional<double> seg_pearson;
  std::optional<double> acc_t;

  [[nodiscard]] bool complete() const { return sys_pearson && seg_pearson && acc_t; }
};

/// Unweighted mean over every (dataset, statistic) of datasets whose three
/// statistics are all defined. Throws EmptyInput when none is complete.
double avg_corr(const std::map<std::string, DatasetStats>& parts);

struct CategorizedPair {
  std::string category;
  double chosen = 0.0;
  double rejected = 0.0;
};

struct PairwiseReport {
  std::map<std::string, double> per_category;
  double overall = 0.0;  // unweighted mean of category accuracies
};

PairwiseReport grouped_pairwise_accuracy(std::span<const CategorizedPair> pairs);

struct EvalReport {
  std::map<std::string, DatasetStats> datasets;
  std::optional<double> avg_corr;
  std::optional<PairwiseReport> pairwise;
};

/// Computes every statistic a dataset supports; undefined ones stay empty.
EvalReport evaluate_grouped(const GroupedScores& g, AccTiePolicy policy = AccTiePolicy::Strict);

}  // namespace metacal
