#include "metacal/core_types.hpp"

#include <cmath>
#include <set>

namespace metacal {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::MissingTarget: return "MissingTarget";
    case ErrorKind::ArityMismatch: return "ArityMismatch";
    case ErrorKind::SpecMismatch: return "SpecMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::FactorizationFailure: return "FactorizationFailure";
    case ErrorKind::TooFewMetrics: return "TooFewMetrics";
    case ErrorKind::InvalidTarget: return "InvalidTarget";
    case ErrorKind::TooFewExamples: return "TooFewExamples";
    case ErrorKind::NoRankablePairs: return "NoRankablePairs";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::HeaderMismatch: return "HeaderMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case ErrorKind::MalformedModel: return "MalformedModel";
    case ErrorKind::ColumnMismatch: return "ColumnMismatch";
    case ErrorKind::InvalidMatrix: return "InvalidMatrix";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

void MetricSpec::validate() const {
  if (name.empty()) {
    throw Error(ErrorKind::InvalidConfig, "metric name must not be empty");
  }
  if (!std::isfinite(min) || !std::isfinite(max)) {
    throw Error(ErrorKind::InvalidConfig, "metric '" + name + "' has a non-finite range");
  }
  if (!(min < max)) {
    throw Error(ErrorKind::InvalidConfig, "metric '" + name + "' requires min < max");
  }
}

void validate_metric_set(std::span<const MetricSpec> specs) {
  std::set<std::string_view> seen;
  for (const auto& spec : specs) {
    spec.validate();
    if (!seen.insert(spec.name).second) {
      throw Error(ErrorKind::InvalidConfig, "duplicate metric name '" + spec.name + "'");
    }
  }
}

std::string to_string(const ExampleId& id) {
  return "(" + id.dataset + ", " + id.system + ", " + id.segment + ")";
}

ScoreMatrix::ScoreMatrix(std::vector<std::string> metric_names, std::vector<ScoreRow> rows)
    : metric_names_(std::move(metric_names)), rows_(std::move(rows)) {
  std::set<std::string_view> names;
  for (const auto& name : metric_names_) {
    if (!names.insert(name).second) {
      throw Error(ErrorKind::InvalidMatrix, "duplicate metric column '" + name + "'");
    }
  }
  std::set<ExampleId> ids;
  for (const auto& row : rows_) {
    if (row.scores.size() != metric_names_.size()) {
      throw Error(ErrorKind::InvalidMatrix, "row " + to_string(row.id) + " has " +
                                                std::to_string(row.scores.size()) + " scores, expected " +
                                                std::to_string(metric_names_.size()));
    }
    for (double v : row.scores) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::NonFiniteValue, "row " + to_string(row.id) + " holds a non-finite score");
      }
    }
    if (!ids.insert(row.id).second) {
      throw Error(ErrorKind::InvalidMatrix, "duplicate example id " + to_string(row.id));
    }
  }
}

std::vector<double> ScoreMatrix::column(std::size_t metric) const {
  if (metric >= metric_names_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "column index out of range");
  }
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& row : rows_) out.push_back(row.scores[metric]);
  return out;
}

std::optional<std::size_t> ScoreMatrix::find_metric(std::string_view name) const {
  for (std::size_t i = 0; i < metric_names_.size(); ++i) {
    if (metric_names_[i] == name) return i;
  }
  return std::nullopt;
}

ScoreMatrix ScoreMatrix::select_metrics(std::span<const std::size_t> indices) const {
  std::vector<std::string> names;
  for (auto i : indices) {
    if (i >= metric_names_.size()) throw Error(ErrorKind::DimensionMismatch, "column index out of range");
    names.push_back(metric_names_[i]);
  }
  std::vector<ScoreRow> rows;
  rows.reserve(rows_.size());
  for (const auto& row : rows_) {
    ScoreRow r{row.id, {}};
    for (auto i : indices) r.scores.push_back(row.scores[i]);
    rows.push_back(std::move(r));
  }
  return ScoreMatrix(std::move(names), std::move(rows));
}

ScoreMatrix ScoreMatrix::select_rows(std::span<const std::size_t> indices) const {
  std::vector<ScoreRow> rows;
  rows.reserve(indices.size());
  for (auto i : indices) rows.push_back(rows_.at(i));
  return ScoreMatrix(metric_names_, std::move(rows));
}

PreferenceTarget PreferenceTarget::make_pointwise(std::map<ExampleId, double> z) {
  PreferenceTarget t;
  t.kind = TargetKind::Pointwise;
  t.pointwise = std::move(z);
  return t;
}

PreferenceTarget PreferenceTarget::make_pairwise(std::vector<PreferencePair> pairs) {
  PreferenceTarget t;
  t.kind = TargetKind::Pairwise;
  t.pairwise = std::move(pairs);
  return t;
}

std::vector<double> PreferenceTarget::aligned_scores(const ScoreMatrix& matrix) const {
  if (kind != TargetKind::Pointwise) {
    throw Error(ErrorKind::InvalidTarget, "pairwise target has no per-example scores");
  }
  std::vector<double> z;
  z.reserve(matrix.num_rows());
  for (const auto& row : matrix.rows()) {
    auto it = pointwise.find(row.id);
    if (it == pointwise.end()) {
      throw Error(ErrorKind::MissingTarget, to_string(row.id));
    }
    z.push_back(it->second);
  }
  return z;
}

void validate_alignment(const ScoreMatrix& matrix, const PreferenceTarget& target) {
  if (target.kind == TargetKind::Pointwise) {
    for (const auto& row : matrix.rows()) {
      if (!target.pointwise.contains(row.id)) {
        throw Error(ErrorKind::MissingTarget, to_string(row.id));
      }
    }
    return;
  }
  for (const auto& pair : target.pairwise) {
    if (pair.chosen.size() != matrix.num_metrics() || pair.rejected.size() != matrix.num_metrics()) {
      throw Error(ErrorKind::ArityMismatch, pair.group);
    }
  }
}

std::string_view to_string(Weighting w) {
  switch (w) {
    case Weighting::LinearOnly: return "linear";
    case Weighting::Multiplicative: return "multiplicative";
    case Weighting::Combined: return "combined";
  }
  return "linear";
}

Weighting parse_weighting(std::string_view s) {
  if (s == "linear") return Weighting::LinearOnly;
  if (s == "multiplicative") return Weighting::Multiplicative;
  if (s == "combined") return Weighting::Combined;
  throw Error(ErrorKind::InvalidConfig, "unknown weighting '" + std::string(s) + "'");
}

std::size_t weighting_dimension(Weighting w, std::size_t n) {
  const std::size_t pairs = n < 2 ? 0 : n * (n - 1) / 2;
  switch (w) {
    case Weighting::LinearOnly: return n;
    case Weighting::Multiplicative: return pairs;
    case Weighting::Combined: return n + pairs;
  }
  return n;
}

double RegressionTree::predict(std::span<const double> x) const {
  if (nodes.empty()) return 0.0;
  std::size_t idx = 0;
  while (!nodes[idx].is_leaf()) {
    const auto& node = nodes[idx];
    idx = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left
                                                                                            : node.right);
  }
  return nodes[idx].value;
}

double TreeEnsemble::predict(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict(x);
  return base_score + learning_rate * sum;
}

void TreeEnsemble::validate() const {
  if (!std::isfinite(base_score) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::MalformedModel, "non-finite ensemble parameter");
  }
  const auto n_features = static_cast<int>(feature_names.size());
  for (const auto& tree : trees) {
    if (tree.nodes.empty()) throw Error(ErrorKind::MalformedModel, "empty tree");
    const auto n = static_cast<int>(tree.nodes.size());
    for (int i = 0; i < n; ++i) {
      const auto& node = tree.nodes[static_cast<std::size_t>(i)];
      if (!std::isfinite(node.value) || !std::isfinite(node.threshold) || !std::isfinite(node.gain)) {
        throw Error(ErrorKind::MalformedModel, "non-finite tree node value");
      }
      if (node.is_leaf()) continue;
      if (node.feature >= n_features) {
        throw Error(ErrorKind::MalformedModel, "tree references feature " + std::to_string(node.feature) +
                                                   " but only " + std::to_string(n_features) + " are retained");
      }
      // Children must point forward so traversal always terminates.
      if (node.left <= i || node.right <= i || node.left >= n || node.right >= n) {
        throw Error(ErrorKind::MalformedModel, "tree node has invalid children");
      }
    }
  }
}

std::vector<std::string> CalibratedModel::metric_names() const {
  std::vector<std::string> names;
  names.reserve(metric_specs.size());
  for (const auto& s : metric_specs) names.push_back(s.name);
  return names;
}

void CalibratedModel::validate() const {
  if (version != kSchemaVersion) {
    throw Error(ErrorKind::SchemaVersionUnsupported, "model version " + std::to_string(version));
  }
  try {
    validate_metric_set(metric_specs);
  } catch (const Error& e) {
    throw Error(ErrorKind::MalformedModel, e.what());
  }
  if (metric_specs.empty()) throw Error(ErrorKind::MalformedModel, "model declares no metrics");
  if (kind == ModelKind::Linear) {
    const auto expected = weighting_dimension(weighting, metric_specs.size());
    if (weights.size() != expected || expected == 0) {
      throw Error(ErrorKind::MalformedModel, "weight vector has length " + std::to_string(weights.size()) +
                                                 ", weighting requires " + std::to_string(expected));
    }
    for (double w : weights) {
      if (!std::isfinite(w)) throw Error(ErrorKind::MalformedModel, "non-finite weight");
    }
    return;
  }
  if (trees.feature_names != metric_names()) {
    throw Error(ErrorKind::MalformedModel, "ensemble feature names differ from metric specs");
  }
  trees.validate();
}

}  // namespace metacal
