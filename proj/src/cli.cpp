#include "metacal/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <ostream>
#include <set>

#include "metacal/eval_harness.hpp"
#include "metacal/gbt_calibrator.hpp"
#include "metacal/gp_calibrator.hpp"
#include "metacal/io.hpp"
#include "metacal/objectives.hpp"
#include "metacal/preprocess.hpp"
#include "metacal/scoring.hpp"
#include "metacal/text_metrics.hpp"

namespace metacal {

namespace {

struct CalibrateOptions {
  std::string train;
  std::string specs;
  std::string output;
  std::string trace;
  std::string method = "gp";
  std::string objective = "kendall";
  std::string weighting = "linear";
  std::size_t top_k = 0;
  std::size_t prune_iterations = 0;
  int init_points = 5;
  int n_iter = 100;
  double kappa = 2.576;
  std::string lengthscale = "fixed";
  std::string loss;
  int n_est_low = 100;
  int n_est_high = 1000;
  int n_est_step = 100;
  int max_depth = 6;
  double learning_rate = 0.1;
  int cv_folds = 5;
};

struct ScoreOptions {
  std::string model;
  std::string input;
  std::string output;
};

struct EvaluateOptions {
  std::string input;
  std::string model;
  std::vector<std::string> baselines;
  std::string output;
  std::string tie_policy = "strict";
};

struct BaseMetricsOptions {
  std::string input;
  std::string output;
  std::string specs_out;
  std::vector<std::string> metrics;
};

struct ReportOptions {
  std::string model;
  std::string output;
  double epsilon = 0.01;
};

struct SplitOptions {
  std::string input;
  std::string train_out;
  std::string test_out;
  double fraction = 0.30;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("METACAL_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::InvalidConfig, std::string("METACAL_SEED is not an unsigned integer: ") + env);
  }
  return 0;
}

/// Keeps only the given metric columns in both the matrix and pairwise vectors.
std::pair<ScoreMatrix, PreferenceTarget> restrict_metrics(const ScoreMatrix& m, const PreferenceTarget& t,
                                                          std::span<const std::size_t> keep) {
  PreferenceTarget out = t;
  for (auto& p : out.pairwise) {
    std::vector<double> c;
    std::vector<double> r;
    for (auto k : keep) {
      c.push_back(p.chosen.at(k));
      r.push_back(p.rejected.at(k));
    }
    p.chosen = std::move(c);
    p.rejected = std::move(r);
  }
  return {m.select_metrics(keep), std::move(out)};
}

Json calibrate_trace_gp(const GpCalibration& cal) {
  Json j;
  j["method"] = "gp";
  j["best_index"] = cal.best_index;
  j["best_objective"] = cal.best_objective;
  Json history = Json::array();
  for (const auto& o : cal.history) history.push_back(Json{{"weights", o.weights}, {"objective", o.objective}});
  j["history"] = std::move(history);
  return j;
}

Json calibrate_trace_gbt(const std::vector<std::string>& names, int n_estimators, double cv,
                         const PruneTrace* trace) {
  Json j;
  j["method"] = "gbt";
  j["n_estimators"] = n_estimators;
  j["cv_objective"] = cv;
  if (trace != nullptr) {
    Json pruned = Json::array();
    for (auto f : trace->pruned) pruned.push_back(names[f]);
    Json kept = Json::array();
    for (auto f : trace->best_features) kept.push_back(names[f]);
    j["performances"] = trace->performances;
    j["pruned"] = std::move(pruned);
    j["best_iteration"] = trace->best_iteration;
    j["best_features"] = std::move(kept);
  }
  return j;
}

int cmd_calibrate(const CalibrateOptions& o, std::uint64_t seed, bool weighting_given, std::ostream& out) {
  if (o.method != "gp" && o.method != "gbt") throw Error(ErrorKind::InvalidConfig, "method must be gp or gbt");
  const bool gp = o.method == "gp";
  if (o.prune_iterations > 0 && gp) throw Error(ErrorKind::InvalidConfig, "--prune-iterations requires --method gbt");
  if (weighting_given && !gp) throw Error(ErrorKind::InvalidConfig, "--weighting requires --method gp");

  const auto specs = load_specs(o.specs);
  auto loaded = load_scores(o.train, detect_format(o.train), specs);
  if (!loaded.target) throw Error(ErrorKind::MissingTarget, "training file carries no human scores");
  const auto objective = parse_objective(o.objective);

  const PreprocessConfig pre{specs};
  auto normalized = normalize_matrix(loaded.matrix, pre);
  auto target = normalize_target(*loaded.target, pre);
  validate_alignment(normalized, target);

  std::vector<MetricSpec> kept_specs = specs;
  if (o.top_k > 0) {
    if (o.top_k > specs.size()) throw Error(ErrorKind::InvalidConfig, "--top-k exceeds the number of metrics");
    const auto keep = select_top_k(normalized, target, objective, o.top_k);
    std::tie(normalized, target) = restrict_metrics(normalized, target, keep);
    kept_specs.clear();
    for (auto k : keep) kept_specs.push_back(specs[k]);
  }

  CalibratedModel model;
  Json trace;
  if (gp) {
    GpConfig config;
    config.init_points = o.init_points;
    config.n_iter = o.n_iter;
    config.kappa = o.kappa;
    config.seed = seed;
    config.weighting = parse_weighting(o.weighting);
    if (o.lengthscale == "mml") {
      config.lengthscale_policy = LengthscalePolicy::MaximizeMarginalLikelihood;
    } else if (o.lengthscale != "fixed") {
      throw Error(ErrorKind::InvalidConfig, "--lengthscale must be fixed or mml");
    }
    const auto cal = calibrate_gp(normalized, target, objective, config, kept_specs);
    model = cal.model;
    trace = calibrate_trace_gp(cal);
    out << "gp calibration: best " << o.objective << " " << format_real(cal.best_objective) << " after "
        << cal.history.size() << " evaluations\n";
  } else {
    GbtConfig config;
    config.n_estimators = {o.n_est_low, o.n_est_high, o.n_est_step};
    config.loss = o.loss.empty() ? (target.kind == TargetKind::Pairwise ? GbtLoss::PairwiseRank : GbtLoss::SquaredError)
                                 : parse_gbt_loss(o.loss);
    config.max_depth = o.max_depth;
    config.learning_rate = o.learning_rate;
    config.cv_folds = o.cv_folds;
    config.seed = seed;
    config.validate();
    const auto data = make_labeled_data(normalized, target);
    const auto names = normalized.metric_names();
    if (o.prune_iterations > 0) {
      const auto result = iterative_prune(data, objective, config, o.prune_iterations, kept_specs);
      model = result.model;
      trace = calibrate_trace_gbt(names, result.n_estimators, result.final_cv, &result.trace);
      out << "gbt calibration: cv " << format_real(result.final_cv) << " with " << result.n_estimators
          << " trees on " << model.metric_specs.size() << " metrics\n";
    } else {
      if (data.kind == TargetKind::Pointwise && objective == ObjectiveKind::PairwiseAccuracy) {
        throw Error(ErrorKind::InvalidConfig, "pairwise objective requires pairwise targets");
      }
      const auto search = search_n_estimators(data, objective, config);
      model.kind = ModelKind::Gbt;
      model.metric_specs = kept_specs;
      model.trees = gbt_train(data, config, search.best);
      model.objective_used =
          std::string(to_string(data.kind == TargetKind::Pairwise ? ObjectiveKind::PairwiseAccuracy : objective));
      model.seed = seed;
      trace = calibrate_trace_gbt(names, search.best, search.best_cv, nullptr);
      out << "gbt calibration: cv " << format_real(search.best_cv) << " with " << search.best << " trees\n";
    }
  }
  save_model(o.output, model);
  if (!o.trace.empty()) write_file(o.trace, dump_json(trace) + "\n");
  out << "model written to " << o.output << "\n";
  return 0;
}

int cmd_score(const ScoreOptions& o, std::ostream& out) {
  const auto model = load_model(o.model);
  const auto table = read_score_table(o.input);
  const auto scores = score_with_model(model, table.matrix);
  std::string csv = "dataset,system,segment,meta_score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& id = table.matrix.row(i).id;
    csv += csv_escape(id.dataset) + "," + csv_escape(id.system) + "," + csv_escape(id.segment) + "," +
           format_real(scores[i]) + "\n";
  }
  write_file(o.output, csv);
  out << "scored " << scores.size() << " rows into " << o.output << "\n";
  return 0;
}

std::optional<double> guarded(const std::function<double()>& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DegenerateInput || e.kind() == ErrorKind::NoRankablePairs ||
        e.kind() == ErrorKind::EmptyInput || e.kind() == ErrorKind::LengthMismatch) {
      return std::nullopt;
    }
    throw;
  }
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json evaluate_candidate(const std::string& name, const std::vector<double>& scores, const LoadedScores& table,
                        AccTiePolicy policy) {
  Json j;
  j["name"] = name;
  const auto& target = *table.target;
  if (target.kind == TargetKind::Pairwise) {
    // Rows come in chosen/rejected order, one pair per two rows.
    std::vector<CategorizedPair> pairs;
    for (std::size_t i = 0; i < target.pairwise.size(); ++i) {
      pairs.push_back({target.pairwise[i].category, scores[2 * i], scores[2 * i + 1]});
    }
    const auto report = grouped_pairwise_accuracy(pairs);
    Json per = Json::object();
    for (const auto& [cat, acc] : report.per_category) per[cat] = acc;
    j["pairwise_accuracy"] = Json{{"per_category", std::move(per)}, {"overall_unweighted", report.overall}};
    return j;
  }

  const auto z = target.aligned_scores(table.matrix);
  j["kendall"] = optional_json(guarded([&] { return kendall_tau(scores, z); }));
  j["spearman"] = optional_json(guarded([&] { return spearman_rho(scores, z); }));
  j["pearson"] = optional_json(guarded([&] { return pearson_r(scores, z); }));

  GroupedScores grouped;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& id = table.matrix.row(i).id;
    grouped.add(id.dataset, id.system, id.segment, scores[i], z[i]);
  }
  const auto report = evaluate_grouped(grouped, policy);
  Json datasets = Json::object();
  for (const auto& [ds, stats] : report.datasets) {
    datasets[ds] = Json{{"sys_pearson", optional_json(stats.sys_pearson)},
                        {"seg_pearson", optional_json(stats.seg_pearson)},
                        {"acc_t", optional_json(stats.acc_t)}};
  }
  j["datasets"] = std::move(datasets);
  j["avg_corr_unweighted"] = optional_json(report.avg_corr);
  return j;
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  AccTiePolicy policy = AccTiePolicy::Strict;
  if (o.tie_policy == "half") {
    policy = AccTiePolicy::HalfCredit;
  } else if (o.tie_policy != "strict") {
    throw Error(ErrorKind::InvalidConfig, "--tie-policy must be strict or half");
  }
  if (o.model.empty() && o.baselines.empty()) {
    throw Error(ErrorKind::InvalidConfig, "evaluate needs --model or at least one --baseline");
  }
  const auto table = read_score_table(o.input);
  if (!table.target) throw Error(ErrorKind::MissingTarget, "evaluation file carries no human scores");

  Json report;
  report["tie_policy"] = o.tie_policy;
  report["rows"] = table.matrix.num_rows();
  Json candidates = Json::array();
  if (!o.model.empty()) {
    const auto model = load_model(o.model);
    candidates.push_back(evaluate_candidate("meta", score_with_model(model, table.matrix), table, policy));
  }
  for (const auto& name : o.baselines) {
    const auto idx = table.matrix.find_metric(name);
    if (!idx) throw Error(ErrorKind::ColumnMismatch, "no column '" + name + "' to evaluate");
    candidates.push_back(evaluate_candidate(name, table.matrix.column(*idx), table, policy));
  }
  report["candidates"] = std::move(candidates);
  write_file(o.output, dump_json(report) + "\n");
  out << "evaluation report written to " << o.output << "\n";
  return 0;
}

int cmd_basemetrics(const BaseMetricsOptions& o, std::ostream& out) {
  std::vector<TextMetric> metrics;
  if (o.metrics.empty()) {
    metrics = all_text_metrics();
  } else {
    for (const auto& m : o.metrics) metrics.push_back(parse_text_metric(m));
  }
  const auto corpus = load_corpus(o.input);
  const auto matrix = score_corpus(corpus.entries, metrics);
  std::optional<PreferenceTarget> target;
  if (corpus.human) target = PreferenceTarget::make_pointwise(*corpus.human);
  write_file(o.output, scores_to_csv(matrix, target));
  if (!o.specs_out.empty()) {
    std::vector<MetricSpec> specs;
    for (auto m : metrics) specs.push_back(builtin_spec(m));
    write_file(o.specs_out, specs_to_string(specs));
  }
  out << "scored " << matrix.num_rows() << " segments with " << metrics.size() << " metrics into " << o.output
      << "\n";
  return 0;
}

int cmd_report(const ReportOptions& o, std::ostream& out) {
  const auto report = report_model(load_model(o.model), o.epsilon);
  if (!o.output.empty()) write_file(o.output, dump_json(report_to_json(report)) + "\n");
  out << report_to_text(report);
  return 0;
}

int cmd_split(const SplitOptions& o, std::uint64_t seed, std::ostream& out) {
  const auto table = read_score_table(o.input);
  const bool pairwise = table.target && table.target->kind == TargetKind::Pairwise;
  const std::size_t units = pairwise ? table.target->pairwise.size() : table.matrix.num_rows();
  const auto split = split_train_test(units, o.fraction, seed);

  const auto write_part = [&](const std::vector<std::size_t>& part, const std::string& path) {
    if (pairwise) {
      PreferenceTarget t;
      t.kind = TargetKind::Pairwise;
      for (auto i : part) t.pairwise.push_back(table.target->pairwise[i]);
      write_file(path, pairs_to_jsonl(table.matrix.metric_names(), t));
      return;
    }
    write_file(path, scores_to_csv(table.matrix.select_rows(part), table.target));
  };
  write_part(split.train, o.train_out);
  write_part(split.test, o.test_out);
  out << "split " << units << (pairwise ? " pairs" : " rows") << ": " << split.train.size() << " train, "
      << split.test.size() << " test\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibrate, apply and evaluate meta-metrics built from base metric scores", "metacal"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed_flag;
  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "Random seed (falls back to METACAL_SEED, then 0)");
  };

  CalibrateOptions cal;
  auto* calibrate = app.add_subcommand("calibrate", "Learn a meta-metric from scored training data");
  calibrate->add_option("--train", cal.train, "Scores with human targets (.csv or .jsonl)")->required();
  calibrate->add_option("--specs", cal.specs, "Metric spec JSON")->required();
  calibrate->add_option("--output", cal.output, "Model JSON to write")->required();
  calibrate->add_option("--method", cal.method, "gp or gbt")->capture_default_str();
  calibrate->add_option("--objective", cal.objective, "kendall, spearman, pearson or pairwise")->capture_default_str();
  auto* weighting_opt =
      calibrate->add_option("--weighting", cal.weighting, "linear, multiplicative or combined (gp only)");
  calibrate->add_option("--top-k", cal.top_k, "Keep only the k individually best metrics");
  calibrate->add_option("--prune-iterations", cal.prune_iterations, "Feature pruning rounds (gbt only)");
  calibrate->add_option("--init-points", cal.init_points)->capture_default_str();
  calibrate->add_option("--n-iter", cal.n_iter)->capture_default_str();
  calibrate->add_option("--kappa", cal.kappa)->capture_default_str();
  calibrate->add_option("--lengthscale", cal.lengthscale, "fixed or mml")->capture_default_str();
  calibrate->add_option("--loss", cal.loss, "squarederror, absoluteerror, squaredlogerror or pairwise");
  calibrate->add_option("--n-est-low", cal.n_est_low)->capture_default_str();
  calibrate->add_option("--n-est-high", cal.n_est_high)->capture_default_str();
  calibrate->add_option("--n-est-step", cal.n_est_step)->capture_default_str();
  calibrate->add_option("--max-depth", cal.max_depth)->capture_default_str();
  calibrate->add_option("--learning-rate", cal.learning_rate)->capture_default_str();
  calibrate->add_option("--cv-folds", cal.cv_folds)->capture_default_str();
  calibrate->add_option("--trace", cal.trace, "Optional JSON file for the search trace");
  add_seed(calibrate);

  ScoreOptions sc;
  auto* score = app.add_subcommand("score", "Apply a model to a score table");
  score->add_option("--model", sc.model)->required();
  score->add_option("--input", sc.input)->required();
  score->add_option("--output", sc.output)->required();

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "Correlate a model or raw metrics with human scores");
  evaluate->add_option("--input", ev.input, "Scores with human targets")->required();
  evaluate->add_option("--model", ev.model);
  evaluate->add_option("--baseline", ev.baselines, "Metric column to evaluate as is (repeatable)");
  evaluate->add_option("--output", ev.output, "Report JSON")->required();
  evaluate->add_option("--tie-policy", ev.tie_policy, "strict or half")->capture_default_str();

  BaseMetricsOptions bm;
  auto* basemetrics = app.add_subcommand("basemetrics", "Score a text corpus with the built-in metrics");
  basemetrics->add_option("--input", bm.input, "Corpus CSV")->required();
  basemetrics->add_option("--output", bm.output, "Score CSV")->required();
  basemetrics->add_option("--specs-out", bm.specs_out, "Metric spec JSON for the written columns");
  basemetrics->add_option("--metrics", bm.metrics, "Subset of bleu, chrf, rouge1, rouge2, rougeL");

  ReportOptions rp;
  auto* report = app.add_subcommand("report", "Summarize model weights or importances");
  report->add_option("--model", rp.model)->required();
  report->add_option("--output", rp.output, "Report JSON");
  report->add_option("--epsilon", rp.epsilon, "Weights below this count as dropped")->capture_default_str();

  SplitOptions sp;
  auto* split = app.add_subcommand("split", "Seeded train/test split of a score file");
  split->add_option("--input", sp.input)->required();
  split->add_option("--train-out", sp.train_out)->required();
  split->add_option("--test-out", sp.test_out)->required();
  split->add_option("--fraction", sp.fraction, "Train share")->capture_default_str();
  add_seed(split);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (calibrate->parsed()) return cmd_calibrate(cal, resolve_seed(seed_flag), weighting_opt->count() > 0, out);
    if (score->parsed()) return cmd_score(sc, out);
    if (evaluate->parsed()) return cmd_evaluate(ev, out);
    if (basemetrics->parsed()) return cmd_basemetrics(bm, out);
    if (report->parsed()) return cmd_report(rp, out);
    if (split->parsed()) return cmd_split(sp, resolve_seed(seed_flag), out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace metacal
