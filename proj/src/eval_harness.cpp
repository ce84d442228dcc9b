#include "metacal/eval_harness.hpp"

#include "metacal/error.hpp"

namespace metacal {

namespace {

const DatasetScores& find_dataset(const GroupedScores& g, const std::string& dataset) {
  auto it = g.datasets.find(dataset);
  if (it == g.datasets.end()) throw Error(ErrorKind::EmptyInput, "unknown dataset '" + dataset + "'");
  return it->second;
}

struct SystemMeans {
  std::vector<std::string> systems;
  std::vector<double> metric;
  std::vector<double> human;
};

SystemMeans system_means(const DatasetScores& d) {
  std::map<std::string, std::pair<double, double>> sums;
  std::map<std::string, int> counts;
  for (const auto& [cell, m] : d.metric) {
    auto h = d.human.find(cell);
    if (h == d.human.end()) continue;
    auto& s = sums[cell.first];
    s.first += m;
    s.second += h->second;
    ++counts[cell.first];
  }
  SystemMeans out;
  for (const auto& [system, s] : sums) {
    const double n = counts[system];
    out.systems.push_back(system);
    out.metric.push_back(s.first / n);
    out.human.push_back(s.second / n);
  }
  return out;
}

template <typename F>
std::optional<double> attempt(F&& f) {
  try {
    return f();
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

void GroupedScores::add(const std::string& dataset, const std::string& system, const std::string& segment,
                        double metric_score, double human_score) {
  auto& d = datasets[dataset];
  d.metric[{system, segment}] = metric_score;
  d.human[{system, segment}] = human_score;
}

double sys_pearson(const GroupedScores& g, const std::string& dataset) {
  const auto means = system_means(find_dataset(g, dataset));
  if (means.systems.size() < 2) {
    throw Error(ErrorKind::DegenerateInput, "system-level correlation needs at least two systems");
  }
  return pearson_r(means.metric, means.human);
}

double seg_pearson(const GroupedScores& g, const std::string& dataset) {
  const auto& d = find_dataset(g, dataset);
  std::vector<double> metric;
  std::vector<double> human;
  for (const auto& [cell, m] : d.metric) {
    auto h = d.human.find(cell);
    if (h == d.human.end()) continue;
    metric.push_back(m);
    human.push_back(h->second);
  }
  return pearson_r(metric, human);
}

double acc_t(const GroupedScores& g, const std::string& dataset, AccTiePolicy policy) {
  const auto means = system_means(find_dataset(g, dataset));
  if (means.systems.size() < 2) throw Error(ErrorKind::NoRankablePairs, "fewer than two systems");
  double agree = 0.0;
  std::size_t rankable = 0;
  for (std::size_t i = 0; i < means.systems.size(); ++i) {
    for (std::size_t j = i + 1; j < means.systems.size(); ++j) {
      const double dh = means.human[i] - means.human[j];
      if (dh == 0.0) continue;
      ++rankable;
      const double dm = means.metric[i] - means.metric[j];
      if (dm == 0.0) {
        if (policy == AccTiePolicy::HalfCredit) agree += 0.5;
      } else if ((dm > 0.0) == (dh > 0.0)) {
        agree += 1.0;
      }
    }
  }
  if (rankable == 0) throw Error(ErrorKind::NoRankablePairs, "all human system means tie");
  return agree / static_cast<double>(rankable);
}

double avg_corr(const std::map<std::string, DatasetStats>& parts) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [name, s] : parts) {
    if (!s.complete()) continue;
    sum += *s.sys_pearson + *s.seg_pearson + *s.acc_t;
    count += 3;
  }
  if (count == 0) throw Error(ErrorKind::EmptyInput, "no dataset has complete statistics");
  return sum / count;
}

PairwiseReport grouped_pairwise_accuracy(std::span<const CategorizedPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "no preference pairs");
  std::map<std::string, std::vector<ScoredPair>> by_category;
  for (const auto& p : pairs) by_category[p.category].push_back({p.chosen, p.rejected});
  PairwiseReport report;
  double sum = 0.0;
  for (const auto& [category, scored] : by_category) {
    const double acc = pairwise_accuracy(scored);
    report.per_category[category] = acc;
    sum += acc;
  }
  report.overall = sum / static_cast<double>(by_category.size());
  return report;
}

EvalReport evaluate_grouped(const GroupedScores& g, AccTiePolicy policy) {
  EvalReport report;
  for (const auto& [name, d] : g.datasets) {
    DatasetStats s;
    s.sys_pearson = attempt([&] { return sys_pearson(g, name); });
    s.seg_pearson = attempt([&] { return seg_pearson(g, name); });
    s.acc_t = attempt([&] { return acc_t(g, name, policy); });
    report.datasets[name] = s;
  }
  report.avg_corr = attempt([&] { return avg_corr(report.datasets); });
  return report;
}

}  // namespace metacal
