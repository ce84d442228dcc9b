#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metacal/core_types.hpp"

namespace metacal {

struct SegmentPair {
  std::string hypothesis;
  std::string reference;
};

/// Splits UTF-8 text on Unicode whitespace. No case folding or stemming.
std::vector<std::string> tokenize(std::string_view text);

/// Decodes UTF-8 to code points; malformed bytes decode as U+FFFD.
std::u32string decode_utf8(std::string_view text);

/// Sentence BLEU with clipped n-gram precision and brevity penalty. Orders
/// above 1 use add-one smoothing. An empty hypothesis scores 0.
double bleu(const SegmentPair& pair, int max_n = 4);

/// Character n-gram F-beta. Whitespace is removed before extracting n-grams;
/// precision and recall are averaged over orders that both sides can form.
double chrf(const SegmentPair& pair, int char_n = 6, double beta = 2.0);

/// Token n-gram overlap F1 with clipped counts.
double rouge_n(const SegmentPair& pair, int n);

/// Longest-common-subsequence F1 over tokens.
double rouge_l(const SegmentPair& pair);

enum class TextMetric { Bleu, Chrf, Rouge1, Rouge2, RougeL };

std::string_view metric_name(TextMetric metric);
TextMetric parse_text_metric(std::string_view name);
std::vector<TextMetric> all_text_metrics();

double score_pair(const SegmentPair& pair, TextMetric metric);

/// Range preset for a built-in metric: all are (0, 1, higher is better).
MetricSpec builtin_spec(TextMetric metric);

/// chrF reported on a 0-100 scale by external tooling.
MetricSpec chrf_percent_spec(std::string name = "chrf");

struct CorpusEntry {
  ExampleId id;
  SegmentPair pair;
};

/// One row per entry, one column per selected metric.
ScoreMatrix score_corpus(std::span<const CorpusEntry> corpus, std::span<const TextMetric> metrics);

}  // namespace metacal
