#include "metacal/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace metacal {

namespace {

constexpr double kLogFloor = -1.0 + 1e-6;
constexpr double kMinHessian = 1e-16;
constexpr std::size_t kFullPairGroupLimit = 1000;
constexpr int kSampledPartners = 16;

struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

bool grad_less(const GradPair& a, const GradPair& b) { return a.g < b.g || (a.g == b.g && a.h < b.h); }

// Sums are taken in (g, h) order so the result ignores row order.
GradPair ordered_sum(std::span<const std::size_t> rows, const std::vector<GradPair>& gh) {
  std::vector<GradPair> items;
  items.reserve(rows.size());
  for (auto r : rows) items.push_back(gh[r]);
  std::sort(items.begin(), items.end(), grad_less);
  GradPair s;
  for (const auto& it : items) {
    s.g += it.g;
    s.h += it.h;
  }
  return s;
}

double leaf_weight(double g, double h, double lambda) {
  const double denom = h + lambda;
  return denom > 0.0 ? -g / denom : 0.0;
}

double node_score(double g, double h, double lambda) {
  const double denom = h + lambda;
  return denom > 0.0 ? g * g / denom : 0.0;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, const std::vector<GradPair>& gh, const GbtConfig& config)
      : x_(x), gh_(gh), config_(config) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    RegressionTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(RegressionTree& tree, std::vector<std::size_t> rows, int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const auto split = depth < config_.max_depth && rows.size() >= 2 ? best_split(rows) : Split{};
    if (split.feature < 0) {
      const auto total = ordered_sum(rows, gh_);
      tree.nodes[static_cast<std::size_t>(index)].value = leaf_weight(total.g, total.h, config_.lambda);
      return index;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto r : rows) {
      (x_.at(r, static_cast<std::size_t>(split.feature)) < split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.gain = split.gain;
    node.left = l;
    node.right = r;
    return index;
  }

  Split best_split(const std::vector<std::size_t>& rows) const {
    Split best;
    std::vector<std::size_t> order = rows;
    for (std::size_t f = 0; f < x_.cols; ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = x_.at(a, f);
        const double xb = x_.at(b, f);
        if (xa != xb) return xa < xb;
        return grad_less(gh_[a], gh_[b]);
      });
      double g_total = 0.0;
      double h_total = 0.0;
      for (auto r : order) {
        g_total += gh_[r].g;
        h_total += gh_[r].h;
      }
      double g_left = 0.0;
      double h_left = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        g_left += gh_[order[i]].g;
        h_left += gh_[order[i]].h;
        const double lo = x_.at(order[i], f);
        const double hi = x_.at(order[i + 1], f);
        if (lo == hi) continue;
        const double g_right = g_total - g_left;
        const double h_right = h_total - h_left;
        if (h_left + config_.lambda <= 0.0 || h_right + config_.lambda <= 0.0) continue;
        const double gain = split_gain(g_left, h_left, g_right, h_right, config_.lambda, config_.gamma);
        if (gain > best.gain) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold > lo)) threshold = hi;
          best = Split{static_cast<int>(f), threshold, gain};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& x_;
  const std::vector<GradPair>& gh_;
  const GbtConfig& config_;
};

std::vector<RankPair> pairs_from_targets(const LabeledData& data, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < data.y.size(); ++i) by_group[data.groups[i]].push_back(i);

  std::vector<RankPair> pairs;
  std::mt19937_64 rng(seed);
  for (const auto& [group, members] : by_group) {
    if (members.size() <= kFullPairGroupLimit) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          const auto i = members[a];
          const auto j = members[b];
          if (data.y[i] > data.y[j]) pairs.push_back({i, j});
          if (data.y[j] > data.y[i]) pairs.push_back({j, i});
        }
      }
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    for (auto i : members) {
      for (int k = 0; k < kSampledPartners; ++k) {
        const auto j = members[pick(rng)];
        if (data.y[i] > data.y[j]) pairs.push_back({i, j});
        if (data.y[j] > data.y[i]) pairs.push_back({j, i});
      }
    }
  }
  return pairs;
}

void compute_gradients(GbtLoss loss, const std::vector<double>& pred, const LabeledData& data,
                       const std::vector<RankPair>& pairs, std::vector<GradPair>& gh) {
  const std::size_t n = pred.size();
  switch (loss) {
    case GbtLoss::SquaredError:
      for (std::size_t i = 0; i < n; ++i) gh[i] = {pred[i] - data.y[i], 1.0};
      return;
    case GbtLoss::AbsoluteError:
      for (std::size_t i = 0; i < n; ++i) {
        const double r = pred[i] - data.y[i];
        gh[i] = {r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0), 1.0};
      }
      return;
    case GbtLoss::SquaredLogError:
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::max(pred[i], kLogFloor);
        const double diff = std::log1p(p) - std::log1p(data.y[i]);
        const double denom = 1.0 + p;
        gh[i] = {diff / denom, std::max((1.0 - diff) / (denom * denom), 1e-6)};
      }
      return;
    case GbtLoss::PairwiseRank:
      std::fill(gh.begin(), gh.end(), GradPair{});
      for (const auto& pr : pairs) {
        const double margin = pred[pr.chosen] - pred[pr.rejected];
        const double wrong = 1.0 / (1.0 + std::exp(margin));
        const double h = std::max(wrong * (1.0 - wrong), kMinHessian);
        gh[pr.chosen].g -= wrong;
        gh[pr.rejected].g += wrong;
        gh[pr.chosen].h += h;
        gh[pr.rejected].h += h;
      }
      return;
  }
}

}  // namespace

std::string_view to_string(GbtLoss loss) {
  switch (loss) {
    case GbtLoss::SquaredError: return "squarederror";
    case GbtLoss::AbsoluteError: return "absoluteerror";
    case GbtLoss::SquaredLogError: return "squaredlogerror";
    case GbtLoss::PairwiseRank: return "pairwise";
  }
  return "squarederror";
}

GbtLoss parse_gbt_loss(std::string_view s) {
  if (s == "squarederror" || s == "reg:squarederror") return GbtLoss::SquaredError;
  if (s == "absoluteerror" || s == "reg:absoluteerror") return GbtLoss::AbsoluteError;
  if (s == "squaredlogerror" || s == "reg:squaredlogerror") return GbtLoss::SquaredLogError;
  if (s == "pairwise" || s == "rank:pairwise") return GbtLoss::PairwiseRank;
  throw Error(ErrorKind::InvalidConfig, "unknown boosting loss '" + std::string(s) + "'");
}

std::vector<int> NEstimatorsGrid::values() const {
  validate();
  std::vector<int> out;
  for (int v = low; v <= high; v += step) out.push_back(v);
  return out;
}

void NEstimatorsGrid::validate() const {
  if (low < 1 || step < 1 || low > high || (high - low) % step != 0) {
    throw Error(ErrorKind::InvalidConfig, "n_estimators grid requires 1 <= low <= high and step dividing high - low");
  }
}

GbtConfig GbtConfig::qa_preset() {
  GbtConfig c;
  c.n_estimators = {100, 400, 25};
  c.loss = GbtLoss::SquaredLogError;
  return c;
}

void GbtConfig::validate() const {
  n_estimators.validate();
  if (max_depth < 1) throw Error(ErrorKind::InvalidConfig, "max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "learning_rate must lie in (0, 1]");
  }
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidConfig, "lambda must be >= 0");
  if (!(gamma >= 0.0)) throw Error(ErrorKind::InvalidConfig, "gamma must be >= 0");
  if (cv_folds < 2) throw Error(ErrorKind::InvalidConfig, "cv_folds must be >= 2");
}

LabeledData LabeledData::select_rows(std::span<const std::size_t> rows) const {
  LabeledData out;
  out.kind = kind;
  out.feature_names = feature_names;
  out.x = FeatureMatrix(rows.size(), x.cols);
  std::vector<std::size_t> remap(x.rows, SIZE_MAX);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    remap[r] = i;
    std::copy(x.row(r).begin(), x.row(r).end(), out.x.values.begin() + static_cast<std::ptrdiff_t>(i * x.cols));
    out.y.push_back(y[r]);
    out.groups.push_back(groups[r]);
  }
  for (const auto& p : pairs) {
    if (remap[p.chosen] != SIZE_MAX && remap[p.rejected] != SIZE_MAX) {
      out.pairs.push_back({remap[p.chosen], remap[p.rejected]});
    }
  }
  return out;
}

LabeledData LabeledData::select_features(std::span<const std::size_t> features) const {
  LabeledData out = *this;
  out.x = FeatureMatrix(x.rows, features.size());
  out.feature_names.clear();
  for (std::size_t j = 0; j < features.size(); ++j) {
    out.feature_names.push_back(feature_names.at(features[j]));
    for (std::size_t i = 0; i < x.rows; ++i) out.x.at(i, j) = x.at(i, features[j]);
  }
  return out;
}

void LabeledData::validate() const {
  if (x.rows == 0) throw Error(ErrorKind::EmptyInput, "no training examples");
  if (y.size() != x.rows || groups.size() != x.rows || feature_names.size() != x.cols) {
    throw Error(ErrorKind::LengthMismatch, "labeled data fields disagree in size");
  }
  for (const auto& p : pairs) {
    if (p.chosen >= x.rows || p.rejected >= x.rows) {
      throw Error(ErrorKind::InvalidTarget, "preference pair references a missing row");
    }
  }
}

LabeledData make_labeled_data(const ScoreMatrix& normalized, const PreferenceTarget& target) {
  validate_alignment(normalized, target);
  LabeledData data;
  data.kind = target.kind;
  data.feature_names = normalized.metric_names();
  const std::size_t n = normalized.num_metrics();
  if (target.kind == TargetKind::Pointwise) {
    data.y = target.aligned_scores(normalized);
    data.x = FeatureMatrix(normalized.num_rows(), n);
    for (std::size_t i = 0; i < normalized.num_rows(); ++i) {
      const auto& row = normalized.row(i);
      std::copy(row.scores.begin(), row.scores.end(), data.x.values.begin() + static_cast<std::ptrdiff_t>(i * n));
      data.groups.push_back(row.id.dataset);
    }
    return data;
  }
  data.x = FeatureMatrix(2 * target.pairwise.size(), n);
  for (std::size_t i = 0; i < target.pairwise.size(); ++i) {
    const auto& p = target.pairwise[i];
    for (std::size_t j = 0; j < n; ++j) {
      data.x.at(2 * i, j) = p.chosen[j];
      data.x.at(2 * i + 1, j) = p.rejected[j];
    }
    data.y.push_back(1.0);
    data.y.push_back(0.0);
    data.groups.push_back(p.group);
    data.groups.push_back(p.group);
    data.pairs.push_back({2 * i, 2 * i + 1});
  }
  return data;
}

double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda, double gamma) {
  const double parent = node_score(g_left + g_right, h_left + h_right, lambda);
  return 0.5 * (node_score(g_left, h_left, lambda) + node_score(g_right, h_right, lambda) - parent) - gamma;
}

TreeEnsemble gbt_train(const LabeledData& data, const GbtConfig& config, int n_estimators, TrainTrace* trace) {
  config.validate();
  data.validate();
  if (data.x.rows < 2) throw Error(ErrorKind::EmptyInput, "boosting needs at least two examples");
  if (n_estimators < 0) throw Error(ErrorKind::InvalidConfig, "n_estimators must be >= 0");
  if (config.loss == GbtLoss::SquaredLogError) {
    for (double v : data.y) {
      if (!(v > -1.0)) throw Error(ErrorKind::InvalidTarget, "squared log error needs targets > -1");
    }
  }

  std::vector<RankPair> pairs;
  if (config.loss == GbtLoss::PairwiseRank) {
    pairs = data.kind == TargetKind::Pairwise ? data.pairs : pairs_from_targets(data, config.seed);
    if (pairs.empty()) throw Error(ErrorKind::InvalidTarget, "pairwise ranking found no ordered pairs");
  }

  TreeEnsemble model;
  model.learning_rate = config.learning_rate;
  model.feature_names = data.feature_names;
  if (config.base_score) {
    model.base_score = *config.base_score;
  } else if (config.loss != GbtLoss::PairwiseRank) {
    std::vector<double> sorted = data.y;
    std::sort(sorted.begin(), sorted.end());
    model.base_score = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  }
  if (config.loss == GbtLoss::SquaredLogError) model.base_score = std::max(model.base_score, kLogFloor);

  const std::size_t n = data.x.rows;
  std::vector<double> pred(n, model.base_score);
  std::vector<GradPair> gh(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  for (int round = 0; round < n_estimators; ++round) {
    compute_gradients(config.loss, pred, data, pairs, gh);
    if (trace) {
      std::vector<double> g(n);
      std::vector<double> h(n);
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = gh[i].g;
        h[i] = gh[i].h;
      }
      trace->gradients.push_back(std::move(g));
      trace->hessians.push_back(std::move(h));
    }
    TreeBuilder builder(data.x, gh, config);
    auto tree = builder.build(all);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] += config.learning_rate * tree.predict(data.x.row(i));
      if (config.loss == GbtLoss::SquaredLogError) pred[i] = std::max(pred[i], kLogFloor);
    }
    model.trees.push_back(std::move(tree));
    if (trace) trace->predictions.push_back(pred);
  }
  return model;
}

double predict_prefix(const TreeEnsemble& model, std::span<const double> x, std::size_t n_trees) {
  double sum = 0.0;
  const std::size_t limit = std::min(n_trees, model.trees.size());
  for (std::size_t t = 0; t < limit; ++t) sum += model.trees[t].predict(x);
  return model.base_score + model.learning_rate * sum;
}

std::vector<double> feature_gains(const TreeEnsemble& model) {
  std::vector<double> gains(model.feature_names.size(), 0.0);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) gains.at(static_cast<std::size_t>(node.feature)) += node.gain;
    }
  }
  return gains;
}

std::map<std::string, double> feature_importance(const TreeEnsemble& model) {
  const auto gains = feature_gains(model);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < gains.size(); ++i) out[model.feature_names[i]] = gains[i];
  return out;
}

}  // namespace metacal
