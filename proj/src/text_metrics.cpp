#include "metacal/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace metacal {

namespace {

bool is_space(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

template <typename Seq>
std::map<Seq, int> ngram_counts(const std::vector<typename Seq::value_type>& items, std::size_t n) {
  std::map<Seq, int> counts;
  if (items.size() < n) return counts;
  for (std::size_t i = 0; i + n <= items.size(); ++i) {
    ++counts[Seq(items.begin() + static_cast<std::ptrdiff_t>(i), items.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

template <typename Map>
int clipped_matches(const Map& hyp, const Map& ref) {
  int matches = 0;
  for (const auto& [gram, count] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(count, it->second);
  }
  return matches;
}

using TokenGram = std::vector<std::string>;

}  // namespace

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    int extra = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = b0 & 0x07;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + static_cast<std::size_t>(extra) >= text.size()) {
      out.push_back(0xFFFD);
      break;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      const auto b = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = b0 < 0x80 ? 1 : (b0 & 0xE0) == 0xC0 ? 2 : (b0 & 0xF0) == 0xE0 ? 3 : (b0 & 0xF8) == 0xF0 ? 4 : 1;
    len = std::min(len, text.size() - i);
    const auto chunk = text.substr(i, len);
    const auto cps = decode_utf8(chunk);
    if (cps.size() == 1 && is_space(cps.front())) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.append(chunk);
    }
    i += len;
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double bleu(const SegmentPair& pair, int max_n) {
  if (max_n < 1) throw Error(ErrorKind::InvalidConfig, "BLEU order must be >= 1");
  const auto hyp = tokenize(pair.hypothesis);
  const auto ref = tokenize(pair.reference);
  if (hyp.empty() || ref.empty()) return 0.0;

  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto h = ngram_counts<TokenGram>(hyp, static_cast<std::size_t>(n));
    const auto r = ngram_counts<TokenGram>(ref, static_cast<std::size_t>(n));
    const double matches = clipped_matches(h, r);
    const double total = hyp.size() >= static_cast<std::size_t>(n) ? static_cast<double>(hyp.size() - n + 1) : 0.0;
    double precision = 0.0;
    if (n == 1) {
      precision = matches / total;
    } else {
      precision = (matches + 1.0) / (total + 1.0);
    }
    if (precision <= 0.0) return 0.0;
    log_sum += std::log(precision);
  }
  const double c = static_cast<double>(hyp.size());
  const double r = static_cast<double>(ref.size());
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return std::clamp(brevity * std::exp(log_sum / max_n), 0.0, 1.0);
}

double chrf(const SegmentPair& pair, int char_n, double beta) {
  if (char_n < 1 || !(beta > 0.0)) throw Error(ErrorKind::InvalidConfig, "chrF needs char_n >= 1 and beta > 0");
  auto strip = [](std::string_view s) {
    std::vector<char32_t> chars;
    for (char32_t c : decode_utf8(s)) {
      if (!is_space(c)) chars.push_back(c);
    }
    return chars;
  };
  const auto hyp = strip(pair.hypothesis);
  const auto ref = strip(pair.reference);

  double precision_sum = 0.0;
  double recall_sum = 0.0;
  int orders = 0;
  for (int n = 1; n <= char_n; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (hyp.size() < un || ref.size() < un) break;
    const auto h = ngram_counts<std::u32string>(hyp, un);
    const auto r = ngram_counts<std::u32string>(ref, un);
    const double matches = clipped_matches(h, r);
    precision_sum += matches / static_cast<double>(hyp.size() - un + 1);
    recall_sum += matches / static_cast<double>(ref.size() - un + 1);
    ++orders;
  }
  if (orders == 0) return 0.0;
  const double p = precision_sum / orders;
  const double r = recall_sum / orders;
  const double b2 = beta * beta;
  const double denom = b2 * p + r;
  if (denom <= 0.0) return 0.0;
  return std::clamp((1.0 + b2) * p * r / denom, 0.0, 1.0);
}

double rouge_n(const SegmentPair& pair, int n) {
  if (n < 1) throw Error(ErrorKind::InvalidConfig, "ROUGE order must be >= 1");
  const auto hyp = tokenize(pair.hypothesis);
  const auto ref = tokenize(pair.reference);
  const auto un = static_cast<std::size_t>(n);
  if (hyp.size() < un || ref.size() < un) return 0.0;
  const auto h = ngram_counts<TokenGram>(hyp, un);
  const auto r = ngram_counts<TokenGram>(ref, un);
  const double matches = clipped_matches(h, r);
  if (matches == 0.0) return 0.0;
  const double p = matches / static_cast<double>(hyp.size() - un + 1);
  const double rec = matches / static_cast<double>(ref.size() - un + 1);
  return 2.0 * p * rec / (p + rec);
}

double rouge_l(const SegmentPair& pair) {
  const auto hyp = tokenize(pair.hypothesis);
  const auto ref = tokenize(pair.reference);
  if (hyp.empty() || ref.empty()) return 0.0;
  std::vector<std::size_t> prev(ref.size() + 1, 0);
  std::vector<std::size_t> cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      cur[j] = hyp[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const auto lcs = static_cast<double>(prev[ref.size()]);
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hyp.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

std::string_view metric_name(TextMetric metric) {
  switch (metric) {
    case TextMetric::Bleu: return "bleu";
    case TextMetric::Chrf: return "chrf";
    case TextMetric::Rouge1: return "rouge1";
    case TextMetric::Rouge2: return "rouge2";
    case TextMetric::RougeL: return "rougeL";
  }
  return "bleu";
}

TextMetric parse_text_metric(std::string_view name) {
  for (auto m : all_text_metrics()) {
    if (metric_name(m) == name) return m;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown built-in metric '" + std::string(name) + "'");
}

std::vector<TextMetric> all_text_metrics() {
  return {TextMetric::Bleu, TextMetric::Chrf, TextMetric::Rouge1, TextMetric::Rouge2, TextMetric::RougeL};
}

double score_pair(const SegmentPair& pair, TextMetric metric) {
  switch (metric) {
    case TextMetric::Bleu: return bleu(pair);
    case TextMetric::Chrf: return chrf(pair);
    case TextMetric::Rouge1: return rouge_n(pair, 1);
    case TextMetric::Rouge2: return rouge_n(pair, 2);
    case TextMetric::RougeL: return rouge_l(pair);
  }
  return 0.0;
}

MetricSpec builtin_spec(TextMetric metric) { return MetricSpec{std::string(metric_name(metric)), 0.0, 1.0, true}; }

MetricSpec chrf_percent_spec(std::string name) { return MetricSpec{std::move(name), 0.0, 100.0, true}; }

ScoreMatrix score_corpus(std::span<const CorpusEntry> corpus, std::span<const TextMetric> metrics) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyInput, "empty corpus");
  std::vector<std::string> names;
  for (auto m : metrics) names.emplace_back(metric_name(m));
  std::vector<ScoreRow> rows;
  rows.reserve(corpus.size());
  for (const auto& entry : corpus) {
    ScoreRow row{entry.id, {}};
    for (auto m : metrics) row.scores.push_back(score_pair(entry.pair, m));
    rows.push_back(std::move(row));
  }
  return ScoreMatrix(std::move(names), std::move(rows));
}

}  // namespace metacal
