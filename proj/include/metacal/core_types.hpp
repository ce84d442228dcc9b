#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metacal/error.hpp"

namespace metacal {

/// Declares one base metric: its valid score range and orientation.
struct MetricSpec {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  bool higher_is_better = true;

  /// Throws InvalidConfig unless min < max and both are finite.
  void validate() const;

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

/// Checks each spec and rejects duplicate names.
void validate_metric_set(std::span<const MetricSpec> specs);

/// Identity of one scored example. Keys a task does not need stay "-".
struct ExampleId {
  std::string dataset = "-";
  std::string system = "-";
  std::string segment = "-";

  friend auto operator<=>(const ExampleId&, const ExampleId&) = default;
  friend bool operator==(const ExampleId&, const ExampleId&) = default;
};

std::string to_string(const ExampleId& id);

struct ScoreRow {
  ExampleId id;
  std::vector<double> scores;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

/// M examples by N base-metric scores. Immutable once constructed; the
/// constructor enforces arity, id uniqueness and finiteness.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::vector<std::string> metric_names, std::vector<ScoreRow> rows);

  [[nodiscard]] const std::vector<std::string>& metric_names() const noexcept { return metric_names_; }
  [[nodiscard]] const std::vector<ScoreRow>& rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t num_rows() const noexcept { return rows_.size(); }
  [[nodiscard]] std::size_t num_metrics() const noexcept { return metric_names_.size(); }
  [[nodiscard]] const ScoreRow& row(std::size_t i) const { return rows_.at(i); }

  [[nodiscard]] std::vector<double> column(std::size_t metric) const;
  [[nodiscard]] std::optional<std::size_t> find_metric(std::string_view name) const;

  /// Column subset in the given order.
  [[nodiscard]] ScoreMatrix select_metrics(std::span<const std::size_t> indices) const;
  /// Row subset in the given order.
  [[nodiscard]] ScoreMatrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

 private:
  std::vector<std::string> metric_names_;
  std::vector<ScoreRow> rows_;
};

/// One chosen/rejected comparison, scores in metric-name order.
struct PreferencePair {
  std::string group;
  std::string category = "-";
  std::vector<double> chosen;
  std::vector<double> rejected;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

enum class TargetKind { Pointwise, Pairwise };

/// Human ground truth: either a score per example or a list of preference pairs.
struct PreferenceTarget {
  TargetKind kind = TargetKind::Pointwise;
  std::map<ExampleId, double> pointwise;
  std::vector<PreferencePair> pairwise;

  static PreferenceTarget make_pointwise(std::map<ExampleId, double> z);
  static PreferenceTarget make_pairwise(std::vector<PreferencePair> pairs);

  /// z values in the matrix's row order. Throws MissingTarget.
  [[nodiscard]] std::vector<double> aligned_scores(const ScoreMatrix& matrix) const;

  friend bool operator==(const PreferenceTarget&, const PreferenceTarget&) = default;
};

/// Throws MissingTarget(example_id) or ArityMismatch(group_id).
void validate_alignment(const ScoreMatrix& matrix, const PreferenceTarget& target);

enum class Weighting { LinearOnly, Multiplicative, Combined };
enum class ModelKind { Linear, Gbt };

std::string_view to_string(Weighting w);
Weighting parse_weighting(std::string_view s);

/// Number of weights a scheme needs for n metrics.
std::size_t weighting_dimension(Weighting w, std::size_t n);

// Tree nodes live in a flat array; node 0 is the root.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output before shrinkage
  double gain = 0.0;   // split gain, 0 for leaves

  [[nodiscard]] bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  [[nodiscard]] double predict(std::span<const double> x) const;
  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct TreeEnsemble {
  std::vector<RegressionTree> trees;
  double base_score = 0.0;
  double learning_rate = 0.1;
  std::vector<std::string> feature_names;

  [[nodiscard]] double predict(std::span<const double> x) const;
  /// Throws MalformedModel on dangling children, bad features or non-finite values.
  void validate() const;

  friend bool operator==(const TreeEnsemble&, const TreeEnsemble&) = default;
};

struct CalibratedModel {
  static constexpr int kSchemaVersion = 1;

  int version = kSchemaVersion;
  ModelKind kind = ModelKind::Linear;
  std::vector<MetricSpec> metric_specs;
  Weighting weighting = Weighting::LinearOnly;
  std::vector<double> weights;
  TreeEnsemble trees;
  std::string objective_used = "kendall";
  std::uint64_t seed = 0;

  [[nodiscard]] std::vector<std::string> metric_names() const;
  /// Checks the kind-specific invariants. Throws MalformedModel.
  void validate() const;

  friend bool operator==(const CalibratedModel&, const CalibratedModel&) = default;
};

}  // namespace metacal
