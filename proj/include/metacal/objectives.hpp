#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace metacal {

enum class ObjectiveKind { Kendall, Spearman, Pearson, PairwiseAccuracy };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective(std::string_view s);

// All correlations require equal lengths >= 2 and throw DegenerateInput when
// either side is constant. Ties are exact floating-point equality.

/// Tau-b, O(n log n) by merge-sort inversion counting.
double kendall_tau(std::span<const double> a, std::span<const double> b);

/// Pearson correlation of mid-ranks.
double spearman_rho(std::span<const double> a, std::span<const double> b);

double pearson_r(std::span<const double> a, std::span<const double> b);

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> mid_ranks(std::span<const double> values);

struct ScoredPair {
  double chosen;
  double rejected;
};

/// Share of pairs where chosen outscores rejected; exact ties earn half credit.
double pairwise_accuracy(std::span<const ScoredPair> pairs);

/// Dispatches a correlation objective. PairwiseAccuracy is rejected here
/// because it needs paired data, not a prediction/target list.
double correlation_objective(ObjectiveKind kind, std::span<const double> predicted, std::span<const double> target);

}  // namespace metacal
