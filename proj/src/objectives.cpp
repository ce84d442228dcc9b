#include "metacal/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "metacal/error.hpp"

namespace metacal {

namespace {

void check_inputs(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "lists have lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.size() < 2) {
    throw Error(ErrorKind::DegenerateInput, "correlation needs at least two observations");
  }
}

// Pairs sharing a value within runs of equal elements in a sorted list.
std::int64_t tied_pairs(std::span<const double> sorted) {
  std::int64_t total = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<std::int64_t>(j - i);
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

// Sorts values ascending and returns the number of strict inversions.
std::int64_t merge_count(std::vector<double>& values, std::vector<double>& scratch, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(values, scratch, lo, mid) + merge_count(values, scratch, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (values[i] <= values[j]) {
      scratch[k++] = values[i++];
    } else {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[k++] = values[j++];
    }
  }
  while (i < mid) scratch[k++] = values[i++];
  while (j < hi) scratch[k++] = values[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            values.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Kendall: return "kendall";
    case ObjectiveKind::Spearman: return "spearman";
    case ObjectiveKind::Pearson: return "pearson";
    case ObjectiveKind::PairwiseAccuracy: return "pairwise";
  }
  return "kendall";
}

ObjectiveKind parse_objective(std::string_view s) {
  if (s == "kendall") return ObjectiveKind::Kendall;
  if (s == "spearman") return ObjectiveKind::Spearman;
  if (s == "pearson") return ObjectiveKind::Pearson;
  if (s == "pairwise") return ObjectiveKind::PairwiseAccuracy;
  throw Error(ErrorKind::InvalidConfig, "unknown objective '" + std::string(s) + "'");
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const std::size_t n = a.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });

  std::vector<double> sorted_a(n);
  std::vector<double> by_a(n);
  for (std::size_t k = 0; k < n; ++k) {
    sorted_a[k] = a[order[k]];
    by_a[k] = b[order[k]];
  }

  const auto total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t ties_a = tied_pairs(sorted_a);

  std::int64_t ties_joint = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && sorted_a[j] == sorted_a[i] && by_a[j] == by_a[i]) ++j;
    const auto t = static_cast<std::int64_t>(j - i);
    ties_joint += t * (t - 1) / 2;
    i = j;
  }

  std::vector<double> scratch(n);
  const std::int64_t discordant = merge_count(by_a, scratch, 0, n);
  const std::int64_t ties_b = tied_pairs(by_a);

  const std::int64_t untied_a = total - ties_a;
  const std::int64_t untied_b = total - ties_b;
  if (untied_a == 0 || untied_b == 0) {
    throw Error(ErrorKind::DegenerateInput, "kendall tau of a constant list");
  }
  const std::int64_t concordant = total - ties_a - ties_b + ties_joint - discordant;
  const double denom = std::sqrt(static_cast<double>(untied_a)) * std::sqrt(static_cast<double>(untied_b));
  return std::clamp(static_cast<double>(concordant - discordant) / denom, -1.0, 1.0);
}

std::vector<double> mid_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 (0-based) share rank mean of (i+1..j)
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const auto ra = mid_ranks(a);
  const auto rb = mid_ranks(b);
  return pearson_r(ra, rb);
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const auto n = static_cast<double>(a.size());
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a <= 0.0 || var_b <= 0.0) {
    throw Error(ErrorKind::DegenerateInput, "pearson correlation with zero variance");
  }
  return std::clamp(cov / (std::sqrt(var_a) * std::sqrt(var_b)), -1.0, 1.0);
}

double pairwise_accuracy(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "pairwise accuracy over zero pairs");
  std::size_t wins = 0;
  std::size_t ties = 0;
  for (const auto& p : pairs) {
    if (p.chosen > p.rejected) {
      ++wins;
    } else if (p.chosen == p.rejected) {
      ++ties;
    }
  }
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / static_cast<double>(pairs.size());
}

double correlation_objective(ObjectiveKind kind, std::span<const double> predicted, std::span<const double> target) {
  switch (kind) {
    case ObjectiveKind::Kendall: return kendall_tau(predicted, target);
    case ObjectiveKind::Spearman: return spearman_rho(predicted, target);
    case ObjectiveKind::Pearson: return pearson_r(predicted, target);
    case ObjectiveKind::PairwiseAccuracy: break;
  }
  throw Error(ErrorKind::InvalidConfig, "pairwise accuracy needs pairwise targets");
}

}  // namespace metacal
