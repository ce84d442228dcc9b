#include "metacal/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "metacal/gbt.hpp"
#include "metacal/gp.hpp"
#include "metacal/preprocess.hpp"

namespace metacal {

std::vector<double> score_with_model(const CalibratedModel& model, const ScoreMatrix& raw) {
  model.validate();
  std::vector<std::size_t> columns;
  for (const auto& spec : model.metric_specs) {
    const auto idx = raw.find_metric(spec.name);
    if (!idx) throw Error(ErrorKind::ColumnMismatch, "input lacks model metric '" + spec.name + "'");
    columns.push_back(*idx);
  }
  const auto selected = raw.select_metrics(columns);
  const auto normalized = normalize_matrix(selected, PreprocessConfig{model.metric_specs});

  std::vector<double> out;
  out.reserve(normalized.num_rows());
  for (const auto& row : normalized.rows()) {
    if (model.kind == ModelKind::Gbt) {
      out.push_back(model.trees.predict(row.scores));
      continue;
    }
    const auto features = expand_features(row.scores, model.weighting);
    out.push_back(std::inner_product(features.begin(), features.end(), model.weights.begin(), 0.0));
  }
  return out;
}

TrainTestSplit split_train_test(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorKind::InvalidConfig, "train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  TrainTestSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<std::string> expanded_feature_names(const std::vector<std::string>& metrics, Weighting weighting) {
  std::vector<std::string> out;
  if (weighting != Weighting::Multiplicative) out = metrics;
  if (weighting != Weighting::LinearOnly) {
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      for (std::size_t j = i + 1; j < metrics.size(); ++j) out.push_back(metrics[i] + "*" + metrics[j]);
    }
  }
  return out;
}

ModelReport report_model(const CalibratedModel& model, double epsilon) {
  model.validate();
  ModelReport report;
  report.kind = model.kind;
  report.epsilon = epsilon;
  if (model.kind == ModelKind::Linear) {
    const auto names = expanded_feature_names(model.metric_names(), model.weighting);
    for (std::size_t i = 0; i < names.size(); ++i) {
      report.weights.push_back({names[i], model.weights[i]});
      if (model.weights[i] < epsilon) report.dropped.push_back(names[i]);
    }
    return report;
  }
  const auto gains = feature_gains(model.trees);
  const auto names = model.metric_names();
  for (std::size_t i = 0; i < names.size(); ++i) report.importances.push_back({names[i], gains[i]});
  std::stable_sort(report.importances.begin(), report.importances.end(),
                   [](const WeightEntry& a, const WeightEntry& b) { return a.weight > b.weight; });
  return report;
}

Json report_to_json(const ModelReport& report) {
  Json j;
  j["kind"] = report.kind == ModelKind::Linear ? "linear" : "gbt";
  const auto entries = [](const std::vector<WeightEntry>& v, const char* key) {
    Json arr = Json::array();
    for (const auto& e : v) arr.push_back(Json{{"feature", e.feature}, {key, e.weight}});
    return arr;
  };
  if (report.kind == ModelKind::Linear) {
    j["epsilon"] = report.epsilon;
    j["weights"] = entries(report.weights, "weight");
    j["dropped"] = report.dropped;
  } else {
    j["importances"] = entries(report.importances, "gain");
  }
  return j;
}

std::string report_to_text(const ModelReport& report) {
  std::string out;
  if (report.kind == ModelKind::Linear) {
    out += "linear meta-metric weights\n";
    for (const auto& e : report.weights) out += "  " + e.feature + "\t" + format_real(e.weight) + "\n";
    out += "dropped (weight < " + format_real(report.epsilon) + "):";
    if (report.dropped.empty()) out += " none";
    for (const auto& d : report.dropped) out += " " + d;
    out += "\n";
  } else {
    out += "boosted meta-metric gain importance\n";
    for (const auto& e : report.importances) out += "  " + e.feature + "\t" + format_real(e.weight) + "\n";
  }
  return out;
}

}  // namespace metacal
