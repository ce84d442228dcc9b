// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "metacal/cli.hpp"
#include "metacal/eval_harness.hpp"
#include "metacal/gbt.hpp"
#include "metacal/gbt_calibrator.hpp"
#include "metacal/gp.hpp"
#include "metacal/gp_calibrator.hpp"
#include "metacal/io.hpp"
#include "metacal/objectives.hpp"
#include "metacal/preprocess.hpp"
#include "oracles.hpp"

using namespace metacal;
using V = std::vector<double>;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// AC1
Outcome correlation_parity() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(2, 50);
  std::uniform_int_distribution<int> tie_mode(0, 2);
  double worst = 0;
  int compared = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = len(rng);
    // Mix continuous vectors with heavily tied integer ones.
    const int mode = tie_mode(rng);
    const auto a = oracle::random_vector(rng, n, mode == 0 ? 0 : 3);
    const auto b = oracle::random_vector(rng, n, mode == 2 ? 4 : 0);
    const auto constant = [](const V& v) { return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; }); };
    if (constant(a) || constant(b)) {
      bool threw = false;
      try {
        (void)kendall_tau(a, b);
      } catch (const Error& e) {
        threw = e.kind() == ErrorKind::DegenerateInput;
      }
      if (!threw) return {false, "constant input not rejected"};
      continue;
    }
    worst = std::max({worst, std::abs(kendall_tau(a, b) - oracle::kendall_tau_b(a, b)),
                      std::abs(spearman_rho(a, b) - oracle::spearman(a, b)),
                      std::abs(pearson_r(a, b) - oracle::pearson(a, b))});
    ++compared;
  }
  return {worst <= 1e-12 && compared > 900, fmt("%d vectors compared, max abs err %.3g", compared, worst)};
}

// AC2
Outcome gp_exactness() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> obs(1, 8), dims(1, 4);
  std::uniform_real_distribution<double> u(0, 1), ls(0.3, 2.0);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = obs(rng), d = dims(rng);
    std::vector<WeightVector> w(n, WeightVector(d));
    V rho(n);
    for (int i = 0; i < n; ++i) {
      for (auto& x : w[i]) x = u(rng);
      rho[i] = u(rng) * 2 - 1;
    }
    GpConfig cfg;
    const double l = ls(rng);
    const auto model = gp_fit(w, rho, cfg, l);
    for (int q = 0; q < 5; ++q) {
      WeightVector x(d);
      for (auto& v : x) v = u(rng);
      if (q == 0) x = w[0];
      const auto got = gp_predict(model, x);
      const auto want = oracle::gp_posterior(w, rho, x, l, model.jitter());
      worst = std::max({worst, std::abs(got.mean - want.mean), std::abs(got.std - want.std)});
    }
  }
  return {worst <= 1e-8, fmt("200 problems, max abs err %.3g", worst)};
}

// AC3
Outcome bo_recovery() {
  int passed = 0;
  double worst_gap = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> e(0, 0.01);
    std::vector<ScoreRow> rows;
    std::map<ExampleId, double> zmap;
    V y1, y2, z;
    for (int i = 0; i < 200; ++i) {
      const double a = u(rng), b = u(rng);
      const double t = 0.7 * a + 0.3 * b + e(rng);
      ExampleId id{"d", "s", std::to_string(i)};
      rows.push_back({id, {a, b}});
      zmap[id] = t;
      y1.push_back(a);
      y2.push_back(b);
      z.push_back(t);
    }
    const ScoreMatrix m({"y1", "y2"}, rows);
    const std::vector<MetricSpec> specs{{"y1", 0, 1, true}, {"y2", 0, 1, true}};
    GpConfig cfg;
    cfg.seed = seed;
    const auto cal = calibrate_gp(m, PreferenceTarget::make_pointwise(zmap), ObjectiveKind::Kendall, cfg, specs);
    if (cal.history.size() != 105) return {false, "evaluation budget is not 105"};

    // Kendall is invariant to positive scaling, so the simplex covers every direction.
    const auto mix = [&](double a, double b) {
      V s(y1.size());
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = a * y1[i] + b * y2[i];
      return kendall_tau(s, z);
    };
    double grid = -1;
    for (int k = 0; k <= 200; ++k) grid = std::max(grid, mix(k / 200.0, 1 - k / 200.0));
    const double best = cal.best_objective;
    worst_gap = std::max(worst_gap, grid - best);
    if (best >= grid - 0.02 && best >= kendall_tau(y1, z) && best >= kendall_tau(y2, z) && best >= mix(0.5, 0.5)) {
      ++passed;
    }
  }
  return {passed >= 95, fmt("%d/100 seeds pass, worst gap to grid optimum %.4f", passed, worst_gap)};
}

// AC4
Outcome gbt_monotone() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> e(0, 0.3);
  std::uniform_int_distribution<int> rows(30, 200), cols(1, 5);
  int violations = 0;
  for (int ds = 0; ds < 20; ++ds) {
    const int n = rows(rng), f = cols(rng);
    LabeledData d;
    d.x = FeatureMatrix(n, f);
    for (int j = 0; j < f; ++j) d.feature_names.push_back("f" + std::to_string(j));
    for (int i = 0; i < n; ++i) {
      double t = 0;
      for (int j = 0; j < f; ++j) {
        d.x.at(i, j) = u(rng);
        t += std::sin(3 * (j + 1) * d.x.at(i, j));
      }
      d.y.push_back(t + e(rng));
      d.groups.push_back("d");
    }
    GbtConfig cfg;
    cfg.loss = GbtLoss::SquaredError;
    cfg.learning_rate = 0.3;
    cfg.lambda = 0;
    cfg.gamma = 0;
    TrainTrace trace;
    gbt_train(d, cfg, 100, &trace);
    if (trace.predictions.size() != 100) return {false, "trace does not cover 100 rounds"};
    const auto mse = [&](const V& p) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += (p[i] - d.y[i]) * (p[i] - d.y[i]);
      return s / n;
    };
    double prev = mse(V(n, std::accumulate(d.y.begin(), d.y.end(), 0.0) / n));
    for (const auto& p : trace.predictions) {
      const double cur = mse(p);
      if (cur > prev) ++violations;
      prev = cur;
    }
  }
  return {violations == 0, fmt("20 datasets x 100 rounds, %d increases", violations)};
}

// AC5
Outcome prune_behavior() {
  int noise_first = 0, cv_mismatch = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(5000 + seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> e(0, 0.1);
    LabeledData d;
    d.x = FeatureMatrix(300, 3);
    d.feature_names = {"inf_a", "inf_b", "noise"};
    for (std::size_t i = 0; i < 300; ++i) {
      for (std::size_t j = 0; j < 3; ++j) d.x.at(i, j) = u(rng);
      d.y.push_back(2 * d.x.at(i, 0) + d.x.at(i, 1) + e(rng));
      d.groups.push_back("d");
    }
    GbtConfig cfg;
    cfg.n_estimators = {10, 50, 10};
    cfg.max_depth = 3;
    cfg.seed = seed;
    const std::vector<MetricSpec> specs{{"inf_a", 0, 1, true}, {"inf_b", 0, 1, true}, {"noise", 0, 1, true}};
    const auto r = iterative_prune(d, ObjectiveKind::Kendall, cfg, 3, specs);
    const auto& order = r.trace.pruned;
    const auto pos = [&](std::size_t f) { return std::find(order.begin(), order.end(), f) - order.begin(); };
    if (pos(2) < pos(0) && pos(2) < pos(1)) ++noise_first;
    const double max_p = *std::max_element(r.trace.performances.begin(), r.trace.performances.end());
    const auto recheck = search_n_estimators(d.select_features(r.trace.best_features), ObjectiveKind::Kendall, cfg);
    if (r.final_cv != max_p || recheck.best_cv != r.final_cv) ++cv_mismatch;
  }
  return {noise_first >= 90 && cv_mismatch == 0,
          fmt("noise pruned first in %d/100, CV mismatches %d", noise_first, cv_mismatch)};
}

// AC6
Outcome expansion() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t n = 2; n <= 8; ++n) {
    V y(n);
    for (auto& v : y) v = u(rng);
    const auto mult = expand_features(y, Weighting::Multiplicative);
    const auto comb = expand_features(y, Weighting::Combined);
    if (mult.size() != n * (n - 1) / 2 || comb.size() != n + n * (n - 1) / 2) return {false, fmt("wrong length for N=%zu", n)};
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (comb[i] != y[i]) return {false, fmt("linear part differs for N=%zu", n)};
      for (std::size_t j = i + 1; j < n; ++j, ++k) {
        if (mult[k] != y[i] * y[j] || comb[n + k] != y[i] * y[j]) return {false, fmt("product differs for N=%zu", n)};
      }
    }
  }
  return {true, "N = 2..8"};
}

// AC7
Outcome preprocessing() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_real_distribution<double> mag(-3, 3);
  int failures = 0;
  for (int t = 0; t < 10000; ++t) {
    const double lo = u(rng) * std::pow(10.0, mag(rng));
    const double hi = lo + std::pow(10.0, mag(rng));
    const MetricSpec up{"m", lo, hi, true}, down{"m", lo, hi, false};
    const double span = hi - lo;
    double a = lo + span * (u(rng) * 1.5 + 0.25), b = lo + span * (u(rng) * 1.5 + 0.25);
    if (a > b) std::swap(a, b);
    const double na = normalize_score(a, up), nb = normalize_score(b, up);
    const double fa = normalize_score(a, down), fb = normalize_score(b, down);
    const bool in_range = na >= 0 && na <= 1 && nb >= 0 && nb <= 1 && fa >= 0 && fa <= 1 && fb >= 0 && fb <= 1;
    const bool monotone = na <= nb && fa >= fb;
    const bool inversion = fa == 1.0 - na && fb == 1.0 - nb && normalize_score(lo, up) == 0.0 &&
                           normalize_score(hi, up) == 1.0 && normalize_score(lo, down) == 1.0 &&
                           normalize_score(hi, down) == 0.0;
    if (!(in_range && monotone && inversion)) ++failures;
  }
  return {failures == 0, fmt("10000 cases, %d failures", failures)};
}

// AC8
Outcome harness() {
  GroupedScores g;
  g.add("d", "A", "1", 0.4, 2.5);
  g.add("d", "A", "2", 0.6, 3.5);
  g.add("d", "B", "1", 0.9, 2.0);
  g.add("d", "B", "2", 0.5, 2.0);
  g.add("d", "C", "1", 0.1, 0.5);
  g.add("d", "C", "2", 0.1, 1.5);
  const double acc = acc_t(g, "d");
  const double sys_err = std::abs(sys_pearson(g, "d") - oracle::pearson({0.5, 0.7, 0.1}, {3, 2, 1}));
  const double seg_err = std::abs(seg_pearson(g, "d") -
                                  oracle::pearson({0.4, 0.6, 0.9, 0.5, 0.1, 0.1}, {2.5, 3.5, 2, 2, 0.5, 1.5}));
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1);
  std::uniform_int_distribution<int> systems(2, 8);
  int asym = 0;
  double worst_sym = 0;
  for (int t = 0; t < 100; ++t) {
    GroupedScores p, neg;
    const int s = systems(rng);
    for (int k = 0; k < s; ++k) {
      const double m = n(rng), h = n(rng);  // continuous draws, so no ties
      p.add("d", "S" + std::to_string(k), "1", m, h);
      neg.add("d", "S" + std::to_string(k), "1", -m, h);
    }
    // k/P and (P-k)/P only sum to 1 up to rounding.
    const double dev = std::abs(acc_t(neg, "d") + acc_t(p, "d") - 1.0);
    worst_sym = std::max(worst_sym, dev);
    if (dev > 1e-12) ++asym;
  }
  const bool ok = std::abs(acc - 2.0 / 3.0) <= 1e-12 && sys_err <= 1e-12 && seg_err <= 1e-12 && asym == 0;
  return {ok, fmt("acc_t %.6f, pearson errs %.2g/%.2g, symmetry failures %d (max dev %.2g)", acc, sys_err, seg_err,
                  asym, worst_sym)};
}

// Runs the CLI in-process and returns the exit code.
int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::fprintf(stderr, "metacal %s failed: %s\n", args.front().c_str(), err.str().c_str());
  return code;
}

std::string corpus_path() { return std::string(METACAL_DATA_DIR) + "/desk_corpus.csv"; }

const std::vector<std::string> kBaselines{"bleu", "chrf", "rouge1", "rouge2", "rougeL"};

// basemetrics -> split -> calibrate (gp, gbt) -> score -> evaluate.
bool desk_pipeline(const fs::path& dir) {
  fs::create_directories(dir);
  const auto p = [&](const char* f) { return (dir / f).string(); };
  const std::string seed = "7";
  if (cli({"basemetrics", "--input", corpus_path(), "--output", p("scores.csv"), "--specs-out", p("specs.json")}))
    return false;
  if (cli({"split", "--input", p("scores.csv"), "--train-out", p("train.csv"), "--test-out", p("test.csv"), "--seed",
           seed}))
    return false;
  if (cli({"calibrate", "--train", p("train.csv"), "--specs", p("specs.json"), "--output", p("gp.json"), "--seed",
           seed}))
    return false;
  if (cli({"calibrate", "--train", p("train.csv"), "--specs", p("specs.json"), "--output", p("gbt.json"), "--method",
           "gbt", "--seed", seed, "--n-est-low", "25", "--n-est-high", "200", "--n-est-step", "25", "--max-depth", "3",
           "--cv-folds", "3"}))
    return false;
  for (const char* m : {"gp", "gbt"}) {
    const std::string model = (dir / (std::string(m) + ".json")).string();
    if (cli({"score", "--model", model, "--input", p("test.csv"), "--output",
             (dir / (std::string(m) + "_scored.csv")).string()}))
      return false;
    std::vector<std::string> ev{"evaluate", "--input", p("test.csv"), "--model", model, "--output",
                                (dir / (std::string(m) + "_eval.json")).string()};
    for (const auto& b : kBaselines) ev.insert(ev.end(), {"--baseline", b});
    if (cli(ev)) return false;
  }
  return true;
}

std::vector<std::string> differing_files(const fs::path& a, const fs::path& b) {
  std::vector<std::string> diff;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a)) files.push_back(e.path().filename());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    if (!fs::exists(b / f) || read_file((a / f).string()) != read_file((b / f).string())) diff.push_back(f.string());
  }
  return diff;
}

// AC9
Outcome desk_run() {
  const auto base = oracle::scratch_dir("acceptance_desk");
  const auto start = std::chrono::steady_clock::now();
  if (!desk_pipeline(base / "run1")) return {false, "pipeline failed"};
  const double once = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!desk_pipeline(base / "run2")) return {false, "second pipeline run failed"};
  const auto diff = differing_files(base / "run1", base / "run2");

  const auto gp = Json::parse(read_file((base / "run1" / "gp_eval.json").string()))["candidates"];
  const auto gbt = Json::parse(read_file((base / "run1" / "gbt_eval.json").string()))["candidates"];
  const double meta = gp[0]["kendall"].get<double>();
  double best_single = -1;
  std::string best_name;
  for (std::size_t i = 1; i < gp.size(); ++i) {
    if (gp[i]["kendall"].get<double>() > best_single) {
      best_single = gp[i]["kendall"].get<double>();
      best_name = gp[i]["name"].get<std::string>();
    }
  }
  const bool ok = once < 60 && diff.empty() && meta >= best_single;
  return {ok, fmt("held-out Kendall gp %.4f vs best single %.4f (%s); gbt %.4f (informational); %zu differing files; "
                  "single run %.2f s",
                  meta, best_single, best_name.c_str(), gbt[0]["kendall"].get<double>(), diff.size(), once)};
}

// Every command, including pruning, traces, reports and pairwise JSONL.
bool all_commands(const fs::path& dir) {
  fs::create_directories(dir);
  const auto p = [&](const char* f) { return (dir / f).string(); };
  std::ostringstream jsonl;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 60; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    jsonl << "{\"group\":\"g" << i << "\",\"category\":\"" << (i % 3 ? "chat" : "safety") << "\",\"chosen\":{\"x\":"
          << format_real(std::max(a, b)) << ",\"y\":" << format_real(c) << "},\"rejected\":{\"x\":"
          << format_real(std::min(a, b)) << ",\"y\":" << format_real(d) << "}}\n";
  }
  write_file(p("pairs.jsonl"), jsonl.str());
  write_file(p("pspecs.json"),
             R"({"metrics":[{"name":"x","min":0,"max":1,"higher_is_better":true},)"
             R"({"name":"y","min":0,"max":1,"higher_is_better":true}]})");
  const std::vector<std::vector<std::string>> commands{
      {"basemetrics", "--input", corpus_path(), "--output", p("scores.csv"), "--specs-out", p("specs.json")},
      {"split", "--input", p("scores.csv"), "--train-out", p("train.csv"), "--test-out", p("test.csv"), "--seed", "3"},
      {"calibrate", "--train", p("train.csv"), "--specs", p("specs.json"), "--output", p("gp.json"), "--seed", "3",
       "--weighting", "combined", "--n-iter", "30", "--lengthscale", "mml", "--trace", p("gp_trace.json")},
      {"calibrate", "--train", p("train.csv"), "--specs", p("specs.json"), "--output", p("gbt.json"), "--method", "gbt",
       "--seed", "3", "--n-est-low", "10", "--n-est-high", "40", "--n-est-step", "10", "--max-depth", "3",
       "--cv-folds", "3", "--prune-iterations", "3", "--trace", p("gbt_trace.json")},
      {"score", "--model", p("gp.json"), "--input", p("test.csv"), "--output", p("scored.csv")},
      {"evaluate", "--input", p("test.csv"), "--model", p("gbt.json"), "--baseline", "chrf", "--output",
       p("eval.json")},
      {"report", "--model", p("gbt.json"), "--output", p("report_gbt.json")},
      {"report", "--model", p("gp.json"), "--output", p("report_gp.json")},
      {"split", "--input", p("pairs.jsonl"), "--train-out", p("ptrain.jsonl"), "--test-out", p("ptest.jsonl"),
       "--fraction", "0.5", "--seed", "3"},
      {"calibrate", "--train", p("ptrain.jsonl"), "--specs", p("pspecs.json"), "--output", p("pgbt.json"), "--method",
       "gbt", "--seed", "3", "--n-est-low", "5", "--n-est-high", "20", "--n-est-step", "5", "--cv-folds", "3"},
      {"evaluate", "--input", p("ptest.jsonl"), "--model", p("pgbt.json"), "--output", p("peval.json")},
  };
  for (const auto& c : commands) {
    if (cli(c)) return false;
  }
  return true;
}

// AC10
Outcome determinism() {
  const auto base = oracle::scratch_dir("acceptance_determinism");
  if (!all_commands(base / "a") || !all_commands(base / "b")) return {false, "a command failed"};
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(base / "a")) ++files;
  const auto diff = differing_files(base / "a", base / "b");
  std::string names;
  for (const auto& d : diff) names += " " + d;
  return {diff.empty(), fmt("%zu files compared, %zu differ%s", files, diff.size(), names.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"AC1 correlation oracle parity", correlation_parity},
      {"AC2 GP posterior exactness", gp_exactness},
      {"AC3 BO recovery of a two-metric mixture", bo_recovery},
      {"AC4 GBT squared-loss monotonicity", gbt_monotone},
      {"AC5 iterative pruning behavior", prune_behavior},
      {"AC6 multiplicative expansion arithmetic", expansion},
      {"AC7 preprocessing invariants", preprocessing},
      {"AC8 harness statistics", harness},
      {"AC9 end-to-end desk run", desk_run},
      {"AC10 byte-identical reruns", determinism},
  };
  // Wall-clock limits per criterion, in seconds (0: none).
  const std::map<std::string, double> limits{{"AC1", 10}, {"AC3", 120}};
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::string id = std::string(name).substr(0, std::string(name).find(' '));
    if (auto it = limits.find(id); it != limits.end() && secs >= it->second) {
      o.pass = false;
      o.detail += fmt("; exceeded %.0f s", it->second);
    }
    std::printf("[%s] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(checks.size()) - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
