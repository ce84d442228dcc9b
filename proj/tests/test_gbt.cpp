#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "metacal/gbt.hpp"
#include "metacal/objectives.hpp"
#include "oracles.hpp"

using namespace metacal;

using V = std::vector<double>;

namespace {

LabeledData pointwise(const std::vector<V>& rows, const V& y) {
  LabeledData d;
  d.x = FeatureMatrix(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) d.x.at(i, j) = rows[i][j];
  }
  d.y = y;
  d.groups.assign(rows.size(), "g");
  for (std::size_t j = 0; j < rows.front().size(); ++j) d.feature_names.push_back("f" + std::to_string(j));
  return d;
}

LabeledData random_regression(std::mt19937_64& rng, std::size_t n, std::size_t f,
                              const std::function<double(const V&)>& fn, double noise) {
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> e(0, noise);
  std::vector<V> rows;
  V y;
  for (std::size_t i = 0; i < n; ++i) {
    V r(f);
    for (auto& v : r) v = u(rng);
    y.push_back(fn(r) + (noise > 0 ? e(rng) : 0.0));
    rows.push_back(r);
  }
  return pointwise(rows, y);
}

GbtConfig plain(GbtLoss loss = GbtLoss::SquaredError) {
  GbtConfig c;
  c.loss = loss;
  c.n_estimators = {10, 10, 1};
  return c;
}

double mse(const V& p, const V& y) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
  return s / static_cast<double>(p.size());
}

}  // namespace

TEST(GbtTrain, ConstantTargetsLeaveZeroLeaves) {
  const auto d = pointwise({{0.1}, {0.4}, {0.7}, {0.9}}, {2.5, 2.5, 2.5, 2.5});
  auto cfg = plain();
  cfg.lambda = 0;
  TrainTrace trace;
  const auto m = gbt_train(d, cfg, 5, &trace);
  for (const auto& p : trace.predictions.front()) EXPECT_EQ(p, 2.5);
  for (const auto& t : m.trees) {
    ASSERT_EQ(t.nodes.size(), 1u);
    EXPECT_EQ(t.nodes[0].value, 0.0);
  }
}

TEST(GbtTrain, BinaryFeatureAnalyticSolution) {
  const auto d = pointwise({{0}, {1}, {0}, {1}}, {0, 1, 0, 1});
  GbtConfig cfg = plain();
  cfg.max_depth = 1;
  cfg.learning_rate = 1.0;
  cfg.lambda = 0;
  cfg.gamma = 0;
  cfg.base_score = 0.5;
  const auto m = gbt_train(d, cfg, 1);
  ASSERT_EQ(m.trees.size(), 1u);
  const auto& nodes = m.trees[0].nodes;
  ASSERT_EQ(nodes.size(), 3u);
  EXPECT_EQ(nodes[0].feature, 0);
  EXPECT_EQ(nodes[0].threshold, 0.5);
  EXPECT_EQ(nodes[nodes[0].left].value, -0.5);
  EXPECT_EQ(nodes[nodes[0].right].value, 0.5);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(m.predict(d.x.row(i)), d.y[i]);
}

TEST(GbtTrain, DefaultBaseScoreIsTargetMean) {
  const auto d = pointwise({{0}, {1}, {2}}, {1, 2, 6});
  EXPECT_EQ(gbt_train(d, plain(), 0).base_score, 3.0);
}

TEST(GbtTrain, SplitGainsMatchIndependentRecount) {
  std::mt19937_64 rng(4);
  const auto d = random_regression(rng, 80, 3, [](const V& x) { return x[0] * 2 + std::sin(5 * x[1]); }, 0.1);
  auto cfg = plain();
  cfg.max_depth = 3;
  cfg.lambda = 0.7;
  cfg.gamma = 0.01;
  TrainTrace trace;
  const auto m = gbt_train(d, cfg, 6, &trace);
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    const auto& g = trace.gradients[t];
    const auto& h = trace.hessians[t];
    // Route every row to its nodes and recompute each split's gain from raw sums.
    const auto& nodes = m.trees[t].nodes;
    std::vector<std::vector<std::size_t>> members(nodes.size());
    for (std::size_t i = 0; i < d.x.rows; ++i) {
      int n = 0;
      members[0].push_back(i);
      while (nodes[n].feature >= 0) {
        n = d.x.at(i, nodes[n].feature) < nodes[n].threshold ? nodes[n].left : nodes[n].right;
        members[n].push_back(i);
      }
    }
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto sums = [&](int node) {
        double sg = 0, sh = 0;
        for (auto i : members[node]) {
          sg += g[i];
          sh += h[i];
        }
        return std::pair{sg, sh};
      };
      const auto [G, H] = sums(static_cast<int>(k));
      if (nodes[k].feature < 0) {
        EXPECT_NEAR(nodes[k].value, -G / (H + cfg.lambda), 1e-9);
        continue;
      }
      const auto [GL, HL] = sums(nodes[k].left);
      const auto [GR, HR] = sums(nodes[k].right);
      const double expected =
          0.5 * (GL * GL / (HL + cfg.lambda) + GR * GR / (HR + cfg.lambda) - G * G / (H + cfg.lambda)) - cfg.gamma;
      EXPECT_NEAR(nodes[k].gain, expected, 1e-9);
      EXPECT_GT(nodes[k].gain, 0.0);
    }
  }
}

TEST(GbtTrain, SquaredLossNonIncreasing) {
  std::mt19937_64 rng(17);
  const auto d = random_regression(rng, 60, 2, [](const V& x) { return x[0] - x[1] * x[1]; }, 0.2);
  auto cfg = plain();
  cfg.lambda = 0;
  cfg.gamma = 0;
  cfg.learning_rate = 0.3;
  TrainTrace trace;
  gbt_train(d, cfg, 40, &trace);
  double prev = mse(V(d.y.size(), std::accumulate(d.y.begin(), d.y.end(), 0.0) / d.y.size()), d.y);
  for (const auto& p : trace.predictions) {
    const double cur = mse(p, d.y);
    EXPECT_LE(cur, prev);
    prev = cur;
  }
}

TEST(GbtTrain, PrefixOfLongRunEqualsShortRun) {
  std::mt19937_64 rng(5);
  const auto d = random_regression(rng, 50, 3, [](const V& x) { return x[2]; }, 0.1);
  const auto cfg = plain();
  const auto long_run = gbt_train(d, cfg, 12);
  const auto short_run = gbt_train(d, cfg, 5);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(long_run.trees[t], short_run.trees[t]);
  for (std::size_t i = 0; i < d.x.rows; ++i) {
    EXPECT_EQ(predict_prefix(long_run, d.x.row(i), 5), short_run.predict(d.x.row(i)));
  }
}

TEST(GbtTrain, MatchesTreeWalkOracle) {
  std::mt19937_64 rng(6);
  const auto d = random_regression(rng, 70, 4, [](const V& x) { return x[0] * x[3]; }, 0.05);
  const auto m = gbt_train(d, plain(), 8);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int i = 0; i < 100; ++i) {
    V x{u(rng), u(rng), u(rng), u(rng)};
    EXPECT_NEAR(m.predict(x), oracle::ensemble_predict(m, x), 1e-12);
  }
}

TEST(GbtTrain, RowOrderInvariant) {
  std::mt19937_64 rng(8);
  const auto d = random_regression(rng, 40, 2, [](const V& x) { return x[0] + 0.5 * x[1]; }, 0.1);
  std::vector<std::size_t> perm(d.x.rows);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto shuffled = d.select_rows(perm);
  const auto a = gbt_train(d, plain(), 10);
  const auto b = gbt_train(shuffled, plain(), 10);
  for (std::size_t i = 0; i < d.x.rows; ++i) EXPECT_EQ(a.predict(d.x.row(i)), b.predict(d.x.row(i)));
}

TEST(GbtTrain, PairwiseRankSeparatesPairs) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  LabeledData d;
  d.kind = TargetKind::Pairwise;
  d.feature_names = {"a", "b"};
  const std::size_t n = 40;
  d.x = FeatureMatrix(2 * n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    V c{u(rng), u(rng)}, r{u(rng), u(rng)};
    if (c[0] < r[0]) std::swap(c, r);
    for (std::size_t j = 0; j < 2; ++j) {
      d.x.at(2 * i, j) = c[j];
      d.x.at(2 * i + 1, j) = r[j];
    }
    d.y.insert(d.y.end(), {1.0, 0.0});
    d.groups.insert(d.groups.end(), 2, "p" + std::to_string(i));
    d.pairs.push_back({2 * i, 2 * i + 1});
  }
  auto cfg = plain(GbtLoss::PairwiseRank);
  cfg.learning_rate = 0.3;
  const auto m = gbt_train(d, cfg, 50);
  EXPECT_EQ(m.base_score, 0.0);
  std::vector<ScoredPair> scored;
  for (const auto& p : d.pairs) scored.push_back({m.predict(d.x.row(p.chosen)), m.predict(d.x.row(p.rejected))});
  EXPECT_EQ(pairwise_accuracy(scored), 1.0);
}

TEST(GbtTrain, PairwiseRankOnPointwiseTargets) {
  std::mt19937_64 rng(10);
  const auto d = random_regression(rng, 60, 2, [](const V& x) { return 3 * x[1]; }, 0.0);
  const auto m = gbt_train(d, plain(GbtLoss::PairwiseRank), 30);
  V pred;
  for (std::size_t i = 0; i < d.x.rows; ++i) pred.push_back(m.predict(d.x.row(i)));
  EXPECT_GT(kendall_tau(pred, d.y), 0.8);
}

TEST(GbtTrain, OtherLossesFit) {
  std::mt19937_64 rng(11);
  const auto d = random_regression(rng, 80, 2, [](const V& x) { return x[0] + x[1]; }, 0.05);
  for (auto loss : {GbtLoss::AbsoluteError, GbtLoss::SquaredLogError}) {
    const auto m = gbt_train(d, plain(loss), 60);
    V pred;
    for (std::size_t i = 0; i < d.x.rows; ++i) pred.push_back(m.predict(d.x.row(i)));
    EXPECT_GT(pearson_r(pred, d.y), 0.9) << to_string(loss);
  }
}

TEST(GbtTrain, SquaredLogErrorDomain) {
  const auto d = pointwise({{0}, {1}}, {-1.0, 0.5});
  try {
    gbt_train(d, plain(GbtLoss::SquaredLogError), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidTarget);
  }
}

TEST(GbtTrain, NeedsExamples) {
  const auto d = pointwise({{0}}, {1.0});
  EXPECT_THROW(gbt_train(d, plain(), 1), Error);
}

TEST(FeatureImportance, SingleFeatureAndUnusedFeature) {
  std::mt19937_64 rng(12);
  const auto one = random_regression(rng, 50, 1, [](const V& x) { return x[0]; }, 0.0);
  const auto m1 = gbt_train(one, plain(), 5);
  const auto imp1 = feature_importance(m1);
  ASSERT_EQ(imp1.size(), 1u);
  EXPECT_GT(imp1.at("f0"), 0.0);

  auto two = random_regression(rng, 50, 2, [](const V& x) { return x[0] > 0.5 ? 1.0 : 0.0; }, 0.0);
  for (std::size_t i = 0; i < two.x.rows; ++i) two.x.at(i, 1) = 0.25;  // constant column never splits
  const auto imp2 = feature_importance(gbt_train(two, plain(), 5));
  EXPECT_GT(imp2.at("f0"), 0.0);
  EXPECT_EQ(imp2.at("f1"), 0.0);
}

TEST(FeatureImportance, InformativeBeatsNoise) {
  std::mt19937_64 rng(13);
  const auto d = random_regression(rng, 200, 2, [](const V& x) { return 4 * x[0]; }, 0.1);
  const auto g = feature_gains(gbt_train(d, plain(), 20));
  EXPECT_GT(g[0], g[1]);
  for (double v : g) EXPECT_GE(v, 0.0);
}

TEST(GbtConfig, GridsAndValidation) {
  NEstimatorsGrid grid;
  EXPECT_EQ(grid.values().size(), 10u);
  EXPECT_EQ(GbtConfig::qa_preset().n_estimators.values().size(), 13u);
  EXPECT_EQ(GbtConfig::qa_preset().n_estimators.values().back(), 400);
  NEstimatorsGrid bad{100, 1000, 400};
  EXPECT_THROW(bad.validate(), Error);
  GbtConfig c;
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), Error);
  c = GbtConfig{};
  c.cv_folds = 1;
  EXPECT_THROW(c.validate(), Error);
  for (auto l : {GbtLoss::SquaredError, GbtLoss::AbsoluteError, GbtLoss::SquaredLogError, GbtLoss::PairwiseRank}) {
    EXPECT_EQ(parse_gbt_loss(to_string(l)), l);
  }
  EXPECT_EQ(parse_gbt_loss("reg:squarederror"), GbtLoss::SquaredError);
  EXPECT_EQ(parse_gbt_loss("rank:pairwise"), GbtLoss::PairwiseRank);
}

TEST(SplitGain, Formula) {
  EXPECT_DOUBLE_EQ(split_gain(-2, 2, 2, 2, 0, 0), 0.5 * (2 + 2 - 0));
  EXPECT_DOUBLE_EQ(split_gain(-2, 2, 2, 2, 0, 0.5), 1.5);
}
